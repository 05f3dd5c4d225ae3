// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Gaussian-mechanism noise multiplier at unit sensitivity, from the exact
//! (analytic) Gaussian privacy profile.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::normal_cdf;

const MAX_BISECTIONS: usize = 200;
const SIGMA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(domain(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }
}

/// Smallest `delta` achieved by the Gaussian mechanism with noise `sigma` at
/// sensitivity one: `Phi(1/(2 sigma) - eps sigma) - e^eps Phi(-1/(2 sigma) - eps sigma)`.
pub fn gaussian_delta(epsilon: f64, sigma: f64) -> f64 {
    let a = 0.5 / sigma;
    let b = epsilon * sigma;
    let tail = normal_cdf(-a - b);
    let second = if tail > 0.0 {
        (epsilon + tail.ln()).exp()
    } else {
        0.0
    };
    normal_cdf(a - b) - second
}

/// Noise multiplier `sigma_{eps,delta}` for sensitivity one, found by
/// bisection on the monotone privacy profile. Returns the upper end of the
/// final bracket, so the result always satisfies the budget.
pub fn gaussian_sigma(budget: &PrivacyBudget) -> Result<f64> {
    let PrivacyBudget { epsilon, delta } = *budget;
    let feasible = |s: f64| gaussian_delta(epsilon, s) <= delta;

    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric(
                "no feasible noise multiplier below 1e12".into(),
            ));
        }
    }
    let mut lo = hi / 2.0;
    while feasible(lo) {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return Ok(hi);
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= SIGMA_TOL * hi.max(1.0) {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric(format!(
        "bisection did not converge for epsilon = {epsilon}, delta = {delta}"
    )))
}

/// Classical bound `sqrt(2 ln(1.25 / delta)) / epsilon`, valid for `epsilon <= 1`.
pub fn classical_gaussian_sigma(budget: &PrivacyBudget) -> f64 {
    (2.0 * (1.25 / budget.delta).ln()).sqrt() / budget.epsilon
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma(eps: f64, delta: f64) -> f64 {
        gaussian_sigma(&PrivacyBudget::new(eps, delta).unwrap()).unwrap()
    }

    #[test]
    fn below_classical_bound() {
        let s = sigma(1.0, 1e-5);
        assert!(s <= 4.847, "{s}");
        assert!(s <= classical_gaussian_sigma(&PrivacyBudget::new(1.0, 1e-5).unwrap()));
    }

    #[test]
    fn monotone_in_epsilon_and_delta() {
        assert!(sigma(8.0, 1e-5) < sigma(1.0, 1e-5));
        assert!(sigma(1.0, 0.5) < sigma(1.0, 1e-5));
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let s = sigma(eps, 1e-6);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn tight_bracketing() {
        for (eps, delta) in [(0.5, 1e-6), (1.0, 1e-5), (4.0, 1e-3), (8.0, 1e-5)] {
            let s = sigma(eps, delta);
            assert!(gaussian_delta(eps, s) <= delta + 1e-12);
            assert!(gaussian_delta(eps, s - 1e-6) > delta);
        }
    }

    #[test]
    fn invalid_budgets() {
        assert!(PrivacyBudget::new(0.0, 1e-5).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY, 1e-5).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
    }
}
