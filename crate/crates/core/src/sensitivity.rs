// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Multi-participation sensitivity of Toeplitz strategies under
//! `b`-min-separation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::toeplitz::{column_norms, ToeplitzOperator};

/// Largest `n` accepted by [`sens_bruteforce`].
pub const BRUTEFORCE_CAP: usize = 24;

/// Tolerance (relative to `c_0`) for the nonnegative/nonincreasing check.
pub const MONOTONE_TOL: f64 = 1e-12;

/// `n` iterations, participations at least `b` apart, at most `k` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipationSchema {
    pub n: usize,
    pub b: usize,
    pub k: usize,
}

impl ParticipationSchema {
    pub fn new(n: usize, b: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("schema needs n >= 1"));
        }
        if b == 0 || b > n {
            return Err(domain(format!(
                "min separation must satisfy 1 <= b <= n, got b = {b}"
            )));
        }
        if k == 0 || (k - 1) * b > n - 1 {
            return Err(domain(format!(
                "k = {k} participations do not fit: need (k - 1) b <= n - 1 with n = {n}, b = {b}"
            )));
        }
        Ok(Self { n, b, k })
    }

    /// `k` participations with the default separation `b = floor(n / k)`.
    pub fn with_default_separation(n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(domain("k must be at least 1"));
        }
        Self::new(n, (n / k).max(1), k)
    }

    /// Maximal participation count allowed by the separation, `ceil(n / b)`.
    pub fn max_participations(n: usize, b: usize) -> usize {
        n.div_ceil(b)
    }
}

fn check_schema(c: &ToeplitzOperator, schema: &ParticipationSchema) -> Result<()> {
    ParticipationSchema::new(schema.n, schema.b, schema.k)?;
    if c.n() != schema.n {
        return Err(Error::DimensionMismatch {
            expected: schema.n,
            actual: c.n(),
        });
    }
    Ok(())
}

/// Checks the hypotheses of the Toeplitz sensitivity formula:
/// `c_0 >= c_1 >= ... >= c_{n-1} >= 0`.
pub fn check_nonincreasing_nonnegative(c: &ToeplitzOperator) -> Result<()> {
    let a = c.coeffs();
    let tol = MONOTONE_TOL * a[0].abs().max(f64::MIN_POSITIVE);
    if let Some(j) = a.iter().position(|&v| v < -tol) {
        return Err(Error::Precondition(format!(
            "strategy coefficient c_{j} = {} is negative",
            a[j]
        )));
    }
    if let Some(j) = a.windows(2).position(|w| w[1] > w[0] + tol) {
        return Err(Error::Precondition(format!(
            "strategy coefficients increase at j = {}: c_{} = {} < c_{} = {}",
            j + 1,
            j,
            a[j],
            j + 1,
            a[j + 1]
        )));
    }
    Ok(())
}

/// Exact sensitivity for nonnegative nonincreasing LTT strategies:
/// the norm of the sum of columns `0, b, 2b, ..., (k-1)b`.
pub fn sens_exact(c: &ToeplitzOperator, schema: &ParticipationSchema) -> Result<f64> {
    check_schema(c, schema)?;
    check_nonincreasing_nonnegative(c)?;
    let a = c.coeffs();
    let ParticipationSchema { n, b, k } = *schema;
    let mut total = 0.0;
    for i in 0..n {
        let jmax = (k - 1).min(i / b);
        let row: f64 = (0..=jmax).map(|j| a[i - j * b]).sum();
        total += row * row;
    }
    Ok(total.sqrt())
}

/// Operator-norm bound `sqrt(k ||C||_{1->2}^2 + (k/b) ||C||_{1->1}^2)`.
pub fn sens_upper_bound(c: &ToeplitzOperator, schema: &ParticipationSchema) -> Result<f64> {
    check_schema(c, schema)?;
    check_nonincreasing_nonnegative(c)?;
    let (l1, l2) = column_norms(c);
    let k = schema.k as f64;
    let b = schema.b as f64;
    Ok((k * l2 * l2 + k / b * l1 * l1).sqrt())
}

/// Exhaustive sensitivity over every participation set with gaps `>= b`
/// and at most `k` elements. Exact for nonnegative `C`; makes no assumption
/// about which pattern is optimal.
pub fn sens_bruteforce(c: &ToeplitzOperator, schema: &ParticipationSchema) -> Result<f64> {
    check_schema(c, schema)?;
    let n = schema.n;
    if n > BRUTEFORCE_CAP {
        return Err(Error::TooLarge {
            what: "brute-force sensitivity",
            size: n,
            cap: BRUTEFORCE_CAP,
        });
    }
    if let Some(j) = c.coeffs().iter().position(|&v| v < 0.0) {
        return Err(Error::Precondition(format!(
            "brute-force sensitivity needs nonnegative C, c_{j} = {}",
            c.coeffs()[j]
        )));
    }
    let mut acc = vec![0.0; n];
    let mut best = 0.0f64;
    enumerate(c.coeffs(), schema, 0, schema.k, &mut acc, &mut best);
    Ok(best.sqrt())
}

// Depth-first over the next participation index `start..n`; `acc` holds the
// running column sum and is restored on the way back up.
fn enumerate(
    a: &[f64],
    schema: &ParticipationSchema,
    start: usize,
    remaining: usize,
    acc: &mut [f64],
    best: &mut f64,
) {
    if remaining == 0 {
        return;
    }
    let n = schema.n;
    for col in start..n {
        for r in col..n {
            acc[r] += a[r - col];
        }
        let norm2: f64 = acc.iter().map(|v| v * v).sum();
        if norm2 > *best {
            *best = norm2;
        }
        enumerate(a, schema, col + schema.b, remaining - 1, acc, best);
        for r in col..n {
            acc[r] -= a[r - col];
        }
    }
}
