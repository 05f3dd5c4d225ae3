// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! `bifr` command-line front-end.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 precondition
//! violation, 4 check-suite violation, 1 anything else.

mod args;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use bifr_core::catalog::{inverse_coeffs, strategy_coeffs};
use bifr_core::metrics::{b_operator, rmse_with_budget};
use bifr_core::theory::{self, CheckReport};
use bifr_core::tuner::{compare, default_gamma_grid, parse_grid, sweep, tune, SweepParam};
use bifr_core::{
    gaussian_sigma, rmse, run_prefix_release, FactorizationSpec, PrivacyBudget, RmseReport,
};
use clap::Parser;

use args::{parse_spec, Cli, Command, MethodName, RunConfig, Which};
use output::{Cell, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] bifr_core::Error),
    #[error("{0} check violation(s)")]
    Violations(usize),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use bifr_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Precondition(_)) => 3,
            CliError::Core(E::Numeric(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Violations(_) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

const SPEC_COLUMNS: [&str; 6] = ["method", "n", "gamma", "lambda", "c", "bandwidth"];

fn spec_cells(spec: &FactorizationSpec) -> Vec<Cell> {
    let m = &spec.method;
    vec![
        m.name().into(),
        spec.n.into(),
        m.gamma().into(),
        m.lambda().into(),
        m.c().into(),
        m.bandwidth().into(),
    ]
}

fn with_spec(extra: &[&'static str]) -> Vec<&'static str> {
    SPEC_COLUMNS.iter().chain(extra).copied().collect()
}

fn report_table(reports: &[RmseReport]) -> Table {
    let mut t = Table::new(&with_spec(&[
        "b",
        "k",
        "frobenius_factor",
        "sensitivity",
        "rmse",
        "sigma",
        "scaled_rmse",
    ]));
    for r in reports {
        let mut row = spec_cells(&r.spec);
        row.extend([
            r.schema.b.into(),
            r.schema.k.into(),
            r.frobenius_factor.into(),
            r.sensitivity.into(),
            r.rmse.into(),
            r.sigma.into(),
            r.scaled_rmse.into(),
        ]);
        t.push(row);
    }
    t
}

fn check_table(reports: &[CheckReport]) -> Table {
    let mut t = Table::new(&[
        "suite",
        "grid_size",
        "violations",
        "worst_margin",
        "details",
    ]);
    for r in reports {
        t.push(vec![
            r.suite.as_str().into(),
            r.grid_size.into(),
            r.violations.into(),
            r.worst_margin.into(),
            r.details.join("; ").into(),
        ]);
    }
    t
}

fn default_grid(param: SweepParam, n: usize) -> Vec<f64> {
    match param {
        SweepParam::Gamma => default_gamma_grid(),
        SweepParam::Lambda => (0..100).map(|i| i as f64 * 0.01).collect(),
        SweepParam::C => (0..=50).map(|i| i as f64 * 0.01).collect(),
        SweepParam::Bandwidth => powers_of_two(n).into_iter().map(|p| p as f64).collect(),
    }
}

fn powers_of_two(n: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |p| p.checked_mul(2))
        .take_while(|&p| p <= n)
        .collect()
}

fn cmd_coeffs(method: &args::MethodArgs, n: usize, which: Which) -> Result<Table, CliError> {
    let spec = method.spec(n, None)?;
    let op = match which {
        Which::Strategy => strategy_coeffs(&spec)?,
        Which::Inverse => inverse_coeffs(&spec)?,
        Which::B => b_operator(&spec)?,
    };
    let mut t = Table::new(&["index", "value"]);
    for (i, v) in op.coeffs().iter().enumerate() {
        t.push(vec![i.into(), (*v).into()]);
    }
    Ok(t)
}

fn cmd_sweep(
    method: &args::MethodArgs,
    schema: &args::SchemaArgs,
    param: Option<&str>,
    grid: Option<&str>,
) -> Result<Table, CliError> {
    let param = match param {
        Some(p) => p.parse::<SweepParam>()?,
        None => SweepParam::primary_for(&method.method.template(schema.n)).ok_or_else(|| {
            CliError::Usage(format!(
                "--method {} has no parameter to sweep besides --param bandwidth",
                args::method_flag(method.method)
            ))
        })?,
    };
    let template = method.spec(schema.n, Some(param))?;
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(param, schema.n),
    };
    let schema = schema.schema()?;
    let result = sweep(&template, param, &grid, &schema)?;
    let mut t = Table::new(&["method", "n", "b", "k", "param", "value", "rmse", "best"]);
    for &(value, r) in &result.grid {
        t.push(vec![
            template.method.name().into(),
            template.n.into(),
            schema.b.into(),
            schema.k.into(),
            param.to_string().into(),
            value.into(),
            r.into(),
            usize::from(value == result.best_param).into(),
        ]);
    }
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    schema_args: &args::SchemaArgs,
    methods: &[MethodName],
    specs: &[String],
    bandwidths: &[usize],
    gamma_grid: &str,
    lambda_grid: &str,
    c_grid: &str,
) -> Result<Table, CliError> {
    if methods.is_empty() && specs.is_empty() {
        return Err(CliError::Usage("compare needs --methods or --spec".into()));
    }
    let n = schema_args.n;
    let schema = schema_args.schema()?;
    let bandwidths = if bandwidths.is_empty() {
        powers_of_two(n).into_iter().filter(|&p| p >= 2).collect()
    } else {
        bandwidths.to_vec()
    };
    let (gammas, lambdas, cs) = (
        parse_grid(gamma_grid)?,
        parse_grid(lambda_grid)?,
        parse_grid(c_grid)?,
    );
    let mut all: Vec<FactorizationSpec> = specs
        .iter()
        .map(|s| parse_spec(s, n))
        .collect::<Result<_, _>>()?;
    for &m in methods {
        let template = FactorizationSpec::new(m.template(n), n)?;
        let param = SweepParam::primary_for(&template.method);
        let grid: Option<(SweepParam, &[f64])> = param.map(|p| {
            let g: &[f64] = match p {
                SweepParam::Gamma => &gammas,
                SweepParam::Lambda => &lambdas,
                _ => &cs,
            };
            (p, g)
        });
        let bands: &[usize] = if matches!(m, MethodName::DpLambdaCgd | MethodName::Identity) {
            &[]
        } else {
            &bandwidths
        };
        all.push(tune(&template, bands, grid, &schema)?.0);
    }
    Ok(report_table(&compare(
        &all,
        &schema,
        schema_args.budget()?.as_ref(),
    )?))
}

fn cmd_simulate(
    method: &args::MethodArgs,
    schema_args: &args::SchemaArgs,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<Table, CliError> {
    let spec = method.spec(schema_args.n, None)?;
    let schema = schema_args.schema()?;
    let budget = schema_args
        .budget()?
        .map_or_else(|| PrivacyBudget::new(1.0, 1e-5), Ok)?;
    let est = run_prefix_release(&spec, &schema, dim, &budget, trials, seed)?;
    let analytic = rmse(&spec, &schema)?.rmse * gaussian_sigma(&budget)?;
    let mut t = Table::new(&with_spec(&[
        "b",
        "k",
        "epsilon",
        "delta",
        "dim",
        "trials",
        "seed",
        "noise_scale",
        "estimate",
        "std_error",
        "analytic",
    ]));
    let mut row = spec_cells(&spec);
    row.extend([
        schema.b.into(),
        schema.k.into(),
        budget.epsilon.into(),
        budget.delta.into(),
        dim.into(),
        trials.into(),
        Cell::Text(seed.to_string()),
        est.noise_scale.into(),
        est.estimate.into(),
        est.std_error.into(),
        analytic.into(),
    ]);
    t.push(row);
    Ok(t)
}

const SUITES: [&str; 6] = [
    "coeff-bounds",
    "prefix-identity",
    "monotone-tail",
    "norm-bounds",
    "sens-bound",
    "error-envelope",
];

fn run_suite(name: &str, quick: bool, seed: u64) -> Result<CheckReport, CliError> {
    let gammas = default_gamma_grid();
    let report = match name {
        "coeff-bounds" => theory::check_coeff_bounds(&gammas, if quick { 200 } else { 1000 })?,
        "prefix-identity" => {
            let mut g = gammas.clone();
            g.extend([0.01, 0.99]);
            theory::check_prefix_identity(&g, if quick { 200 } else { 1000 })?
        }
        "monotone-tail" => {
            let (p, n): (&[usize], usize) = if quick {
                (&[2, 4, 16], 256)
            } else {
                (&[2, 3, 4, 8, 16, 32, 64, 128], 1024)
            };
            theory::check_monotone_tail(&gammas, p, n)?
        }
        "norm-bounds" => {
            let (p, n): (&[usize], &[usize]) = if quick {
                (&[2, 8, 32], &[64, 256])
            } else {
                (&[2, 3, 4, 8, 16, 32, 64, 128, 256], &[256, 1024, 4096])
            };
            theory::check_norm_bounds(&gammas, p, n)?
        }
        "sens-bound" => {
            let count = if quick { 50 } else { 200 };
            theory::check_sens_bound(&theory::random_sens_instances(count, 256, seed)?)?
        }
        "error-envelope" => {
            let n: Vec<usize> = if quick {
                vec![1 << 10, 1 << 12]
            } else {
                (10..=14).map(|e| 1 << e).collect()
            };
            theory::check_error_envelope(&n, &[2, 4, 8, 16, 32, 64, 256], 1, None)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown suite {other:?}; expected all or one of {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(report)
}

fn cmd_verify(suite: &str, quick: bool, seed: u64) -> Result<(Table, usize), CliError> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let reports: Vec<CheckReport> = names
        .iter()
        .map(|s| run_suite(s, quick, seed))
        .collect::<Result<_, _>>()?;
    let violations = reports.iter().map(|r| r.violations).sum();
    Ok((check_table(&reports), violations))
}

fn execute(config: &RunConfig) -> Result<(), CliError> {
    let mut violations = 0;
    let table = match &config.command {
        Command::Coeffs { method, n, which } => cmd_coeffs(method, *n, *which)?,
        Command::Rmse { method, schema } => {
            let spec = method.spec(schema.n, None)?;
            let report = rmse_with_budget(&spec, &schema.schema()?, schema.budget()?.as_ref())?;
            report_table(&[report])
        }
        Command::Sweep {
            method,
            schema,
            param,
            grid,
        } => cmd_sweep(method, schema, param.as_deref(), grid.as_deref())?,
        Command::Compare {
            schema,
            methods,
            specs,
            bandwidths,
            gamma_grid,
            lambda_grid,
            c_grid,
        } => cmd_compare(
            schema,
            methods,
            specs,
            bandwidths,
            gamma_grid,
            lambda_grid,
            c_grid,
        )?,
        Command::Simulate {
            method,
            schema,
            dim,
            trials,
        } => cmd_simulate(method, schema, *dim, *trials, config.seed)?,
        Command::Verify { suite, quick } => {
            let (t, v) = cmd_verify(suite, *quick, config.seed)?;
            violations = v;
            t
        }
        Command::Replay { config: path } => {
            let saved: RunConfig = serde_json::from_reader(File::open(path)?)?;
            if matches!(saved.command, Command::Replay { .. }) {
                return Err(CliError::Usage(
                    "a saved config cannot itself be a replay".into(),
                ));
            }
            return execute(&saved);
        }
    };
    match &config.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(config.format, &mut w)?;
            w.flush()?;
        }
        None => table.write(config.format, io::stdout().lock())?,
    }
    if violations > 0 {
        return Err(CliError::Violations(violations));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = RunConfig {
        command: cli.command,
        seed: cli.global.seed,
        format: cli.global.format,
        out: cli.global.out,
    };
    let result = (|| {
        if let Some(path) = &cli.global.save_config {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, &config)?;
            w.flush()?;
        }
        execute(&config)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bifr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
