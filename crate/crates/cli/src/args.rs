// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line flags. Every type here serializes, so a parsed invocation can
//! be saved as a [`RunConfig`] and replayed.

use std::path::PathBuf;

use bifr_core::calibration::PrivacyBudget;
use bifr_core::tuner::SweepParam;
use bifr_core::{FactorizationSpec, Method, ParticipationSchema};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::output::Format;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bifr",
    version,
    about = "Banded-inverse correlated-noise factorizations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Root seed for all randomness.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Save the parsed invocation as JSON before running it.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,
}

/// A fully parsed invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Dump coefficients of C, C^-1 or B = E C^-1.
    Coeffs {
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Which::Strategy)]
        which: Which,
    },
    /// RMSE, sensitivity and Frobenius factor of one factorization.
    Rmse {
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Evaluate the RMSE over a parameter grid.
    Sweep {
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Parameter to vary; defaults to the method's own parameter.
        #[arg(long)]
        param: Option<String>,
        /// `a:b:step` or a comma-separated list.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Tune several methods and rank them by RMSE.
    Compare {
        #[command(flatten)]
        schema: SchemaArgs,
        /// Methods to tune over bandwidth and their own parameter.
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Vec<MethodName>,
        /// Fixed specs, e.g. `method=bisr,bandwidth=8`; `n` defaults to `--n`.
        #[arg(long = "spec")]
        specs: Vec<String>,
        /// Bandwidth grid; defaults to powers of two up to n.
        #[arg(long, value_delimiter = ',')]
        bandwidths: Vec<usize>,
        #[arg(long, default_value = "0.05:0.95:0.05")]
        gamma_grid: String,
        #[arg(long, default_value = "0:0.99:0.01")]
        lambda_grid: String,
        #[arg(long, default_value = "0:0.5:0.01")]
        c_grid: String,
    },
    /// Monte Carlo prefix-sum RMSE through the streaming engine.
    Simulate {
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Run the inequality check suites.
    Verify {
        /// all, coeff-bounds, prefix-identity, monotone-tail, norm-bounds,
        /// sens-bound or error-envelope.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Smaller grids.
        #[arg(long)]
        quick: bool,
    },
    /// Re-run a configuration saved with `--save-config`.
    Replay { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Strategy,
    Inverse,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    GammaBifr,
    Bisr,
    DpLambdaCgd,
    GammaBfr,
    InvDecay,
    Identity,
}

impl MethodName {
    pub fn template(self, n: usize) -> Method {
        match self {
            MethodName::GammaBifr => Method::GammaBifr {
                gamma: 0.5,
                bandwidth: 2.min(n),
            },
            MethodName::Bisr => Method::Bisr {
                bandwidth: 2.min(n),
            },
            MethodName::DpLambdaCgd => Method::DpLambdaCgd { lambda: 0.0 },
            MethodName::GammaBfr => Method::GammaBfr {
                gamma: 0.5,
                bandwidth: 2.min(n),
            },
            MethodName::InvDecay => Method::InvDecay {
                c: 0.0,
                bandwidth: 2.min(n),
            },
            MethodName::Identity => Method::Identity,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: MethodName,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub bandwidth: Option<usize>,
}

impl MethodArgs {
    /// Builds the spec. A missing `free` parameter is filled with a
    /// placeholder so that sweeps can vary it.
    pub fn spec(&self, n: usize, free: Option<SweepParam>) -> Result<FactorizationSpec, CliError> {
        let name = self.method;
        let uses = |p: SweepParam| -> bool {
            match p {
                SweepParam::Gamma => matches!(name, MethodName::GammaBifr | MethodName::GammaBfr),
                SweepParam::Lambda => name == MethodName::DpLambdaCgd,
                SweepParam::C => name == MethodName::InvDecay,
                SweepParam::Bandwidth => {
                    !matches!(name, MethodName::DpLambdaCgd | MethodName::Identity)
                }
            }
        };
        let given = [
            (SweepParam::Gamma, self.gamma.is_some()),
            (SweepParam::Lambda, self.lambda.is_some()),
            (SweepParam::C, self.c.is_some()),
            (SweepParam::Bandwidth, self.bandwidth.is_some()),
        ];
        for (p, present) in given {
            if present && !uses(p) {
                return Err(CliError::Usage(format!(
                    "--{p} does not apply to --method {}",
                    method_flag(name)
                )));
            }
            if !present && uses(p) && free != Some(p) {
                return Err(CliError::Usage(format!(
                    "--method {} requires --{p}",
                    method_flag(name)
                )));
            }
        }
        let mut method = name.template(n);
        match &mut method {
            Method::GammaBifr { gamma, bandwidth } | Method::GammaBfr { gamma, bandwidth } => {
                *gamma = self.gamma.unwrap_or(*gamma);
                *bandwidth = self.bandwidth.unwrap_or(*bandwidth);
            }
            Method::Bisr { bandwidth } => *bandwidth = self.bandwidth.unwrap_or(*bandwidth),
            Method::DpLambdaCgd { lambda } => *lambda = self.lambda.unwrap_or(*lambda),
            Method::InvDecay { c, bandwidth } => {
                *c = self.c.unwrap_or(*c);
                *bandwidth = self.bandwidth.unwrap_or(*bandwidth);
            }
            Method::Identity => {}
        }
        Ok(FactorizationSpec::new(method, n)?)
    }
}

pub fn method_flag(name: MethodName) -> String {
    name.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SchemaArgs {
    #[arg(long)]
    pub n: usize,
    /// Maximum participations.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Minimum separation; defaults to floor(n / k).
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

impl SchemaArgs {
    pub fn schema(&self) -> Result<ParticipationSchema, CliError> {
        if self.k == 0 {
            return Err(CliError::Usage("--k must be at least 1".into()));
        }
        let b = self.b.unwrap_or((self.n / self.k).max(1));
        Ok(ParticipationSchema::new(self.n, b, self.k)?)
    }

    pub fn budget(&self) -> Result<Option<PrivacyBudget>, CliError> {
        match (self.epsilon, self.delta) {
            (Some(e), Some(d)) => Ok(Some(PrivacyBudget::new(e, d)?)),
            (None, None) => Ok(None),
            _ => Err(CliError::Usage(
                "--epsilon and --delta must be given together".into(),
            )),
        }
    }
}

/// Parses `key=value,...` into a spec; `n` falls back to `default_n`.
pub fn parse_spec(text: &str, default_n: usize) -> Result<FactorizationSpec, CliError> {
    let mut method = None;
    let mut args = MethodArgs {
        method: MethodName::Identity,
        gamma: None,
        lambda: None,
        c: None,
        bandwidth: None,
    };
    let mut n = default_n;
    let bad = |what: &str| CliError::Usage(format!("invalid --spec {text:?}: {what}"));
    for part in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| bad("expected key=value"))?;
        let value = value.trim();
        let num = || value.parse::<f64>().map_err(|_| bad(value));
        let int = || value.parse::<usize>().map_err(|_| bad(value));
        match key.trim() {
            "method" => method = Some(MethodName::from_str(value, false).map_err(|_| bad(value))?),
            "gamma" => args.gamma = Some(num()?),
            "lambda" => args.lambda = Some(num()?),
            "c" => args.c = Some(num()?),
            "bandwidth" | "p" => args.bandwidth = Some(int()?),
            "n" => n = int()?,
            other => return Err(bad(other)),
        }
    }
    args.method = method.ok_or_else(|| bad("missing method"))?;
    args.spec(n, None)
}
