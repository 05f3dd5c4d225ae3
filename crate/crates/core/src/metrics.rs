// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! RMSE of a factorization `E = B C`: `||B||_F sens(C) / sqrt(n)`.

use serde::{Deserialize, Serialize};

use crate::calibration::{gaussian_sigma, PrivacyBudget};
use crate::catalog::{inverse_band, inverse_coeffs, strategy_coeffs, FactorizationSpec};
use crate::error::{Error, Result};
use crate::sensitivity::{sens_exact, ParticipationSchema};
use crate::toeplitz::ToeplitzOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub spec: FactorizationSpec,
    pub schema: ParticipationSchema,
    /// `||B||_F / sqrt(n)`.
    pub frobenius_factor: f64,
    pub sensitivity: f64,
    pub rmse: f64,
    /// Gaussian noise multiplier at unit sensitivity, when a budget is given.
    pub sigma: Option<f64>,
    pub scaled_rmse: Option<f64>,
}

/// Frobenius norm of an LTT operator: the `r`-th subdiagonal has `n - r` entries.
pub fn frobenius_ltt(a: &ToeplitzOperator) -> f64 {
    let n = a.n();
    a.coeffs()
        .iter()
        .enumerate()
        .map(|(r, v)| (n - r) as f64 * v * v)
        .sum::<f64>()
        .sqrt()
}

/// Running prefix sums of `coeffs`, i.e. the coefficients of `E A`.
fn prefix_sums(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// `B = E C^{-1}`.
///
/// For banded-inverse methods the band of `C^{-1}` is summed once and the
/// last partial sum repeats beyond the bandwidth, which costs `O(n + p)`.
pub fn b_operator(spec: &FactorizationSpec) -> Result<ToeplitzOperator> {
    let n = spec.n;
    match inverse_band(spec)? {
        Some(band) => {
            let sums = prefix_sums(&band[..band.len().min(n)]);
            let tail = *sums.last().expect("nonempty band");
            let mut coeffs = sums;
            coeffs.resize(n, tail);
            ToeplitzOperator::new(coeffs)
        }
        None => ToeplitzOperator::new(prefix_sums(inverse_coeffs(spec)?.coeffs())),
    }
}

/// RMSE of `spec` under `schema`, without noise calibration.
pub fn rmse(spec: &FactorizationSpec, schema: &ParticipationSchema) -> Result<RmseReport> {
    rmse_with_budget(spec, schema, None)
}

/// RMSE of `spec`; when a budget is supplied the report also carries the
/// noise multiplier and `rmse * sigma`.
pub fn rmse_with_budget(
    spec: &FactorizationSpec,
    schema: &ParticipationSchema,
    budget: Option<&PrivacyBudget>,
) -> Result<RmseReport> {
    if spec.n != schema.n {
        return Err(Error::DimensionMismatch {
            expected: schema.n,
            actual: spec.n,
        });
    }
    let c = strategy_coeffs(spec)?;
    let sensitivity = sens_exact(&c, schema).map_err(|e| match e {
        Error::Precondition(msg) => Error::Precondition(format!("{spec}: {msg}")),
        other => other,
    })?;
    let b = b_operator(spec)?;
    let frobenius_factor = frobenius_ltt(&b) / (spec.n as f64).sqrt();
    let rmse = frobenius_factor * sensitivity;
    let sigma = budget.map(gaussian_sigma).transpose()?;
    let report = RmseReport {
        spec: *spec,
        schema: *schema,
        frobenius_factor,
        sensitivity,
        rmse,
        sigma,
        scaled_rmse: sigma.map(|s| s * rmse),
    };
    if !(report.rmse.is_finite() && report.rmse > 0.0) {
        return Err(Error::Numeric(format!("non-finite rmse for {spec}")));
    }
    Ok(report)
}
