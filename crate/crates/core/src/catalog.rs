// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Coefficient generators for every supported factorization family.
//!
//! All strategy matrices `C` have unit diagonal and nonnegative,
//! nonincreasing subdiagonals, which is what the exact Toeplitz sensitivity
//! formula requires.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::toeplitz::{ltt_inverse, ToeplitzOperator};

/// A factorization family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Banded inverse fractional root: `C^{-1}` is the first `bandwidth`
    /// coefficients of `(1 - x)^gamma`.
    GammaBifr { gamma: f64, bandwidth: usize },
    /// Banded inverse square root, `GammaBifr` at `gamma = 1/2`.
    Bisr { bandwidth: usize },
    /// `C = Toep(1, lambda, lambda^2, ...)`, inverse bandwidth 2.
    DpLambdaCgd { lambda: f64 },
    /// Banded fractional root: `C` is the first `bandwidth` coefficients of
    /// `(1 - x)^{-gamma}`.
    GammaBfr { gamma: f64, bandwidth: usize },
    /// Banded `1/j + c` strategy: diagonal `r < bandwidth` of `C` is
    /// `(1/(r+1) + c) / (1 + c)`, so `j = r + 1` counts from 1 and the
    /// diagonal is 1.
    InvDecay { c: f64, bandwidth: usize },
    /// DP-SGD, `C = I`.
    Identity,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::GammaBifr { .. } => "gamma-bifr",
            Method::Bisr { .. } => "bisr",
            Method::DpLambdaCgd { .. } => "dp-lambda-cgd",
            Method::GammaBfr { .. } => "gamma-bfr",
            Method::InvDecay { .. } => "inv-decay",
            Method::Identity => "identity",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Method::GammaBifr { gamma, .. } | Method::GammaBfr { gamma, .. } => Some(gamma),
            Method::Bisr { .. } => Some(0.5),
            _ => None,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Method::DpLambdaCgd { lambda } => Some(lambda),
            _ => None,
        }
    }

    pub fn c(&self) -> Option<f64> {
        match *self {
            Method::InvDecay { c, .. } => Some(c),
            _ => None,
        }
    }

    /// Number of nonzero bands in `C^{-1}` (banded-inverse methods) or in `C`
    /// (banded methods).
    pub fn bandwidth(&self) -> Option<usize> {
        match *self {
            Method::GammaBifr { bandwidth, .. }
            | Method::Bisr { bandwidth }
            | Method::GammaBfr { bandwidth, .. }
            | Method::InvDecay { bandwidth, .. } => Some(bandwidth),
            Method::DpLambdaCgd { .. } => Some(2),
            Method::Identity => Some(1),
        }
    }

    /// True when `C^{-1}` is banded, so noise can be correlated from a
    /// bounded window of past noise vectors.
    pub fn is_banded_inverse(&self) -> bool {
        matches!(
            self,
            Method::GammaBifr { .. }
                | Method::Bisr { .. }
                | Method::DpLambdaCgd { .. }
                | Method::Identity
        )
    }
}

/// A fully specified factorization at horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationSpec {
    #[serde(flatten)]
    pub method: Method,
    pub n: usize,
}

impl fmt::Display for FactorizationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={}", self.method.name(), self.n)?;
        if let Some(g) = self.method.gamma() {
            write!(f, ", gamma={g}")?;
        }
        if let Some(l) = self.method.lambda() {
            write!(f, ", lambda={l}")?;
        }
        if let Some(c) = self.method.c() {
            write!(f, ", c={c}")?;
        }
        if let Some(p) = self.method.bandwidth() {
            write!(f, ", p={p}")?;
        }
        write!(f, ")")
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

fn check_bandwidth(p: usize, n: usize) -> Result<()> {
    if p >= 1 && p <= n {
        Ok(())
    } else {
        Err(domain(format!(
            "bandwidth must satisfy 1 <= p <= n = {n}, got {p}"
        )))
    }
}

impl FactorizationSpec {
    pub fn new(method: Method, n: usize) -> Result<Self> {
        let spec = Self { method, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gamma_bifr(gamma: f64, bandwidth: usize, n: usize) -> Result<Self> {
        Self::new(Method::GammaBifr { gamma, bandwidth }, n)
    }

    pub fn bisr(bandwidth: usize, n: usize) -> Result<Self> {
        Self::new(Method::Bisr { bandwidth }, n)
    }

    pub fn dp_lambda_cgd(lambda: f64, n: usize) -> Result<Self> {
        Self::new(Method::DpLambdaCgd { lambda }, n)
    }

    pub fn gamma_bfr(gamma: f64, bandwidth: usize, n: usize) -> Result<Self> {
        Self::new(Method::GammaBfr { gamma, bandwidth }, n)
    }

    pub fn inv_decay(c: f64, bandwidth: usize, n: usize) -> Result<Self> {
        Self::new(Method::InvDecay { c, bandwidth }, n)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(Method::Identity, n)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(domain("horizon n must be at least 1"));
        }
        match self.method {
            Method::GammaBifr { gamma, bandwidth } | Method::GammaBfr { gamma, bandwidth } => {
                check_gamma(gamma)?;
                check_bandwidth(bandwidth, n)
            }
            Method::Bisr { bandwidth } => check_bandwidth(bandwidth, n),
            Method::DpLambdaCgd { lambda } => {
                if (0.0..1.0).contains(&lambda) {
                    Ok(())
                } else {
                    Err(domain(format!("lambda must lie in [0, 1), got {lambda}")))
                }
            }
            Method::InvDecay { c, bandwidth } => {
                check_bandwidth(bandwidth, n)?;
                let last = 1.0 / bandwidth as f64 + c;
                if c.is_finite() && last >= 0.0 && 1.0 + c > 0.0 {
                    Ok(())
                } else {
                    Err(domain(format!(
                        "c = {c} makes the 1/j + c coefficients negative at bandwidth {bandwidth}"
                    )))
                }
            }
            Method::Identity => Ok(()),
        }
    }
}

/// Coefficients of `(1 - x)^{-gamma}`: `(c_gamma)_j = (c_gamma)_{j-1} (gamma + j - 1) / j`.
pub fn binomial_coeffs_neg(gamma: f64, m: usize) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    Ok(binomial_coeffs_neg_unchecked(gamma, m))
}

/// Coefficients of `(1 - x)^{gamma}`: `(c~_gamma)_j = (c~_gamma)_{j-1} (j - 1 - gamma) / j`.
pub fn binomial_coeffs_pos(gamma: f64, m: usize) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    Ok(binomial_coeffs_pos_unchecked(gamma, m))
}

/// [`binomial_coeffs_neg`] without the `(0, 1)` check, for limit experiments.
#[doc(hidden)]
pub fn binomial_coeffs_neg_unchecked(gamma: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    let mut cur = 1.0;
    for j in 0..m {
        if j > 0 {
            cur *= (gamma + j as f64 - 1.0) / j as f64;
        }
        out.push(cur);
    }
    out
}

/// [`binomial_coeffs_pos`] without the `(0, 1)` check, for limit experiments.
#[doc(hidden)]
pub fn binomial_coeffs_pos_unchecked(gamma: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    let mut cur = 1.0;
    for j in 0..m {
        if j > 0 {
            cur *= (j as f64 - 1.0 - gamma) / j as f64;
        }
        out.push(cur);
    }
    out
}

/// Strategy coefficients of a banded-inverse factorization from its inverse
/// band `(1, w_1, ..., w_{p-1})`:
/// `c_j = -sum_{i=1}^{min(j, p-1)} w_i c_{j-i}`. Costs `O(n p)`.
pub fn strategy_from_inverse_band(band: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n];
    if n == 0 {
        return c;
    }
    c[0] = 1.0;
    let p = band.len();
    for j in 1..n {
        let hi = j.min(p.saturating_sub(1));
        let mut acc = 0.0;
        for i in 1..=hi {
            acc -= band[i] * c[j - i];
        }
        c[j] = acc;
    }
    c
}

/// Nonzero band of `C^{-1}` for a banded-inverse method, or `None`.
pub fn inverse_band(spec: &FactorizationSpec) -> Result<Option<Vec<f64>>> {
    spec.validate()?;
    Ok(match spec.method {
        Method::GammaBifr { gamma, bandwidth } => {
            Some(binomial_coeffs_pos_unchecked(gamma, bandwidth))
        }
        Method::Bisr { bandwidth } => Some(binomial_coeffs_pos_unchecked(0.5, bandwidth)),
        Method::DpLambdaCgd { lambda } => Some(vec![1.0, -lambda][..2.min(spec.n)].to_vec()),
        Method::Identity => Some(vec![1.0]),
        Method::GammaBfr { .. } | Method::InvDecay { .. } => None,
    })
}

/// `(C_gamma^{(p)})^{-1}` for a gamma-BIFR (or BISR) spec.
pub fn gamma_bifr_inverse(spec: &FactorizationSpec) -> Result<ToeplitzOperator> {
    match spec.method {
        Method::GammaBifr { .. } | Method::Bisr { .. } => {
            let band = inverse_band(spec)?.expect("banded inverse");
            ToeplitzOperator::padded(&band, spec.n)
        }
        other => Err(domain(format!(
            "gamma_bifr_inverse needs a gamma-bifr or bisr spec, got {}",
            other.name()
        ))),
    }
}

/// Strategy matrix `C` for any spec.
pub fn strategy_coeffs(spec: &FactorizationSpec) -> Result<ToeplitzOperator> {
    spec.validate()?;
    let n = spec.n;
    match spec.method {
        Method::GammaBifr { .. } | Method::Bisr { .. } => {
            let band = inverse_band(spec)?.expect("banded inverse");
            ToeplitzOperator::new(strategy_from_inverse_band(&band, n))
        }
        Method::DpLambdaCgd { lambda } => {
            let mut c = Vec::with_capacity(n);
            let mut cur = 1.0;
            for _ in 0..n {
                c.push(cur);
                cur *= lambda;
            }
            ToeplitzOperator::new(c)
        }
        Method::GammaBfr { gamma, bandwidth } => {
            ToeplitzOperator::padded(&binomial_coeffs_neg_unchecked(gamma, bandwidth), n)
        }
        Method::InvDecay { c, bandwidth } => {
            let norm = 1.0 + c;
            let band: Vec<f64> = (0..bandwidth)
                .map(|r| {
                    if r == 0 {
                        1.0
                    } else {
                        (1.0 / (r as f64 + 1.0) + c) / norm
                    }
                })
                .collect();
            ToeplitzOperator::padded(&band, n)
        }
        Method::Identity => ToeplitzOperator::identity(n),
    }
}

/// `C^{-1}` for any spec; banded-inverse methods are exact, others go
/// through [`ltt_inverse`].
pub fn inverse_coeffs(spec: &FactorizationSpec) -> Result<ToeplitzOperator> {
    match inverse_band(spec)? {
        Some(band) => ToeplitzOperator::padded(&band, spec.n),
        None => ltt_inverse(&strategy_coeffs(spec)?),
    }
}
