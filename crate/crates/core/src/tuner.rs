// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Grid sweeps over factorization parameters and method comparison tables.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::PrivacyBudget;
use crate::catalog::{FactorizationSpec, Method};
use crate::error::{domain, Error, Result};
use crate::metrics::{rmse, rmse_with_budget, RmseReport};
use crate::sensitivity::ParticipationSchema;

/// The tunable parameter of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Gamma,
    Lambda,
    C,
    Bandwidth,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Lambda => "lambda",
            SweepParam::C => "c",
            SweepParam::Bandwidth => "bandwidth",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "lambda" => Ok(SweepParam::Lambda),
            "c" => Ok(SweepParam::C),
            "bandwidth" | "p" => Ok(SweepParam::Bandwidth),
            other => Err(domain(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

impl SweepParam {
    /// Natural parameter of a method family, if it has one besides bandwidth.
    pub fn primary_for(method: &Method) -> Option<Self> {
        match method {
            Method::GammaBifr { .. } | Method::GammaBfr { .. } => Some(SweepParam::Gamma),
            Method::DpLambdaCgd { .. } => Some(SweepParam::Lambda),
            Method::InvDecay { .. } => Some(SweepParam::C),
            Method::Bisr { .. } | Method::Identity => None,
        }
    }
}

/// Copy of `template` with `param` set to `value`, validated.
pub fn with_param(
    template: &FactorizationSpec,
    param: SweepParam,
    value: f64,
) -> Result<FactorizationSpec> {
    let not_applicable = || {
        domain(format!(
            "parameter {param} does not apply to {}",
            template.method.name()
        ))
    };
    let as_bandwidth = || -> Result<usize> {
        if value.fract() == 0.0 && value >= 1.0 && value <= usize::MAX as f64 {
            Ok(value as usize)
        } else {
            Err(domain(format!(
                "bandwidth must be a positive integer, got {value}"
            )))
        }
    };
    let method = match (template.method, param) {
        (Method::GammaBifr { bandwidth, .. }, SweepParam::Gamma) => Method::GammaBifr {
            gamma: value,
            bandwidth,
        },
        (Method::GammaBfr { bandwidth, .. }, SweepParam::Gamma) => Method::GammaBfr {
            gamma: value,
            bandwidth,
        },
        (Method::DpLambdaCgd { .. }, SweepParam::Lambda) => Method::DpLambdaCgd { lambda: value },
        (Method::InvDecay { bandwidth, .. }, SweepParam::C) => Method::InvDecay {
            c: value,
            bandwidth,
        },
        (Method::GammaBifr { gamma, .. }, SweepParam::Bandwidth) => Method::GammaBifr {
            gamma,
            bandwidth: as_bandwidth()?,
        },
        (Method::Bisr { .. }, SweepParam::Bandwidth) => Method::Bisr {
            bandwidth: as_bandwidth()?,
        },
        (Method::GammaBfr { gamma, .. }, SweepParam::Bandwidth) => Method::GammaBfr {
            gamma,
            bandwidth: as_bandwidth()?,
        },
        (Method::InvDecay { c, .. }, SweepParam::Bandwidth) => Method::InvDecay {
            c,
            bandwidth: as_bandwidth()?,
        },
        _ => return Err(not_applicable()),
    };
    FactorizationSpec::new(method, template.n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    /// `(value, rmse)` in grid order.
    pub grid: Vec<(f64, f64)>,
    pub best_param: f64,
    pub best_rmse: f64,
    pub spec_template: FactorizationSpec,
    pub schema: ParticipationSchema,
}

impl SweepResult {
    /// The template with the best parameter substituted.
    pub fn best_spec(&self) -> Result<FactorizationSpec> {
        with_param(&self.spec_template, self.param, self.best_param)
    }
}

/// Evaluates the RMSE of `template` at every value of `grid`.
///
/// Grid points are evaluated in parallel. Ties go to the smaller value.
pub fn sweep(
    template: &FactorizationSpec,
    param: SweepParam,
    grid: &[f64],
    schema: &ParticipationSchema,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(domain("sweep grid is empty"));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(domain(format!("sweep grid contains non-finite value {v}")));
    }
    let specs: Vec<FactorizationSpec> = grid
        .iter()
        .map(|&v| with_param(template, param, v))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = specs
        .par_iter()
        .map(|s| rmse(s, schema).map(|r| r.rmse))
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = grid.iter().copied().zip(values).collect();
    let (best_param, best_rmse) = points
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 < best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .expect("nonempty grid");
    Ok(SweepResult {
        param,
        grid: points,
        best_param,
        best_rmse,
        spec_template: *template,
        schema: *schema,
    })
}

/// Parses `a:b:step` (inclusive range) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(domain("empty grid"));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| domain(format!("invalid number {s:?} in grid")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step.is_nan() || step <= 0.0 || !a.is_finite() || !b.is_finite() || b < a {
                return Err(domain(format!("invalid range {text:?}")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * step).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(domain(format!(
            "grid must be a:b:step or a list, got {text:?}"
        ))),
    }
}

/// `0.05, 0.10, ..., 0.95`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// `lo, lo + step, ..., hi` computed as `i * step` without drift.
pub fn uniform_grid(lo_steps: usize, hi_steps: usize, step: f64) -> Vec<f64> {
    (lo_steps..=hi_steps).map(|i| i as f64 * step).collect()
}

/// Best spec over bandwidths and, when `param` is given, the parameter grid.
/// Ties go to the smaller bandwidth.
pub fn tune(
    template: &FactorizationSpec,
    bandwidths: &[usize],
    param: Option<(SweepParam, &[f64])>,
    schema: &ParticipationSchema,
) -> Result<(FactorizationSpec, f64)> {
    let candidates: Vec<FactorizationSpec> = if bandwidths.is_empty() {
        vec![*template]
    } else {
        bandwidths
            .iter()
            .map(|&p| with_param(template, SweepParam::Bandwidth, p as f64))
            .collect::<Result<_>>()?
    };
    let mut best: Option<(FactorizationSpec, f64)> = None;
    for spec in candidates {
        let (spec, value) = match param {
            Some((param, grid)) => {
                let r = sweep(&spec, param, grid, schema)?;
                (r.best_spec()?, r.best_rmse)
            }
            None => (spec, rmse(&spec, schema)?.rmse),
        };
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((spec, value));
        }
    }
    best.ok_or_else(|| domain("nothing to tune"))
}

/// RMSE reports for `specs`, sorted ascending by RMSE (stable).
pub fn compare(
    specs: &[FactorizationSpec],
    schema: &ParticipationSchema,
    budget: Option<&PrivacyBudget>,
) -> Result<Vec<RmseReport>> {
    if let Some(s) = specs.iter().find(|s| s.n != schema.n) {
        return Err(Error::DimensionMismatch {
            expected: schema.n,
            actual: s.n,
        });
    }
    let mut rows: Vec<RmseReport> = specs
        .par_iter()
        .map(|s| rmse_with_budget(s, schema, budget))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.rmse.total_cmp(&b.rmse));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_grid_forms() {
        let g = parse_grid("0.05:0.95:0.05").unwrap();
        assert_eq!(g.len(), 19);
        assert!((g[18] - 0.95).abs() < 1e-12);
        assert_eq!(parse_grid("0.1, 0.2,0.5").unwrap(), vec![0.1, 0.2, 0.5]);
        assert_eq!(parse_grid("3").unwrap(), vec![3.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
        assert_eq!(default_gamma_grid().len(), 19);
    }

    #[test]
    fn lambda_sweep_beats_dp_sgd() {
        let schema = ParticipationSchema::new(256, 64, 4).unwrap();
        let template = FactorizationSpec::dp_lambda_cgd(0.0, 256).unwrap();
        let grid = uniform_grid(0, 9, 0.1);
        let r = sweep(&template, SweepParam::Lambda, &grid, &schema).unwrap();
        assert!(r.best_rmse <= r.grid[0].1);
        assert!(r.grid.iter().all(|&(_, v)| r.best_rmse <= v));
        let identity = rmse(&FactorizationSpec::identity(256).unwrap(), &schema).unwrap();
        assert!((r.grid[0].1 - identity.rmse).abs() <= 1e-12 * identity.rmse);
    }

    #[test]
    fn small_bandwidth_prefers_large_gamma() {
        let schema = ParticipationSchema::new(1024, 1024, 1).unwrap();
        let template = FactorizationSpec::gamma_bifr(0.5, 2, 1024).unwrap();
        let r = sweep(&template, SweepParam::Gamma, &default_gamma_grid(), &schema).unwrap();
        assert!(r.best_param > 0.5, "best gamma {}", r.best_param);
    }

    #[test]
    fn ties_go_to_smaller_value() {
        // gamma is irrelevant at p = 1
        let schema = ParticipationSchema::new(16, 16, 1).unwrap();
        let template = FactorizationSpec::gamma_bifr(0.5, 1, 16).unwrap();
        let r = sweep(&template, SweepParam::Gamma, &[0.7, 0.3, 0.5], &schema).unwrap();
        assert_eq!(r.best_param, 0.3);
    }

    #[test]
    fn refinement_never_hurts() {
        let schema = ParticipationSchema::new(256, 64, 4).unwrap();
        let template = FactorizationSpec::gamma_bifr(0.5, 8, 256).unwrap();
        let coarse = sweep(
            &template,
            SweepParam::Gamma,
            &uniform_grid(1, 9, 0.1),
            &schema,
        )
        .unwrap();
        let fine = sweep(
            &template,
            SweepParam::Gamma,
            &uniform_grid(2, 18, 0.05),
            &schema,
        )
        .unwrap();
        assert!(fine.best_rmse <= coarse.best_rmse);
    }

    #[test]
    fn sweep_errors() {
        let schema = ParticipationSchema::new(16, 16, 1).unwrap();
        let t = FactorizationSpec::gamma_bifr(0.5, 2, 16).unwrap();
        assert!(sweep(&t, SweepParam::Gamma, &[], &schema).is_err());
        assert!(sweep(&t, SweepParam::Gamma, &[0.5, 1.5], &schema).is_err());
        assert!(sweep(&t, SweepParam::Lambda, &[0.5], &schema).is_err());
        assert!(sweep(&t, SweepParam::Bandwidth, &[2.5], &schema).is_err());
        assert!(sweep(&t, SweepParam::Gamma, &[f64::NAN], &schema).is_err());
    }

    #[test]
    fn compare_sorts_and_is_permutation_invariant() {
        let n = 128;
        let schema = ParticipationSchema::new(n, 32, 4).unwrap();
        let specs = vec![
            FactorizationSpec::identity(n).unwrap(),
            FactorizationSpec::bisr(8, n).unwrap(),
            FactorizationSpec::dp_lambda_cgd(0.8, n).unwrap(),
        ];
        let rows = compare(&specs, &schema, None).unwrap();
        assert!(rows.windows(2).all(|w| w[0].rmse <= w[1].rmse));
        let mut rev = specs.clone();
        rev.reverse();
        assert_eq!(compare(&rev, &schema, None).unwrap(), rows);
        let single = compare(&specs[..1], &schema, None).unwrap();
        assert_eq!(single[0], rmse(&specs[0], &schema).unwrap());
        let other = [FactorizationSpec::identity(64).unwrap()];
        assert!(compare(&other, &schema, None).is_err());
    }

    #[test]
    fn tune_over_bandwidth() {
        let n = 256;
        let schema = ParticipationSchema::new(n, n, 1).unwrap();
        let t = FactorizationSpec::gamma_bifr(0.5, 2, n).unwrap();
        let grid = default_gamma_grid();
        let (best, value) = tune(
            &t,
            &[2, 4, 8, 16],
            Some((SweepParam::Gamma, &grid)),
            &schema,
        )
        .unwrap();
        let at2 = sweep(&t, SweepParam::Gamma, &grid, &schema).unwrap();
        assert!(value <= at2.best_rmse);
        assert!(best.method.bandwidth().unwrap() >= 2);
    }
}
