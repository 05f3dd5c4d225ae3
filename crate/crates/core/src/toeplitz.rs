// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Lower-triangular Toeplitz (LTT) operators stored by their first column.
//!
//! Every matrix in a prefix-sum factorization `E = B C` used here is LTT, so
//! products and inverses reduce to operations on coefficient sequences:
//! a product is a truncated convolution and an inverse is a triangular
//! recurrence on the coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default cap on the dimension of dense materializations.
pub const DENSE_CAP: usize = 4096;

/// A lower-triangular Toeplitz matrix `M[i][j] = a[i - j]` for `i >= j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzOperator {
    coeffs: Vec<f64>,
}

impl ToeplitzOperator {
    /// Builds an operator from its first-column coefficients.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(domain("Toeplitz operator needs n >= 1"));
        }
        if let Some(j) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("coefficient {j} is not finite")));
        }
        Ok(Self { coeffs })
    }

    /// `coeffs` padded with zeros (or truncated) to length `n`.
    pub fn padded(coeffs: &[f64], n: usize) -> Result<Self> {
        let mut v = vec![0.0; n];
        let m = coeffs.len().min(n);
        v[..m].copy_from_slice(&coeffs[..m]);
        Self::new(v)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::padded(&[1.0], n)
    }

    /// The all-ones prefix-sum operator `E`.
    pub fn prefix_sum(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Number of leading subdiagonals up to the last nonzero coefficient.
    pub fn bandwidth(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&v| v != 0.0)
            .map_or(0, |j| j + 1)
    }

    /// Multiplies every coefficient by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.coeffs.iter().map(|v| v * alpha).collect())
    }

    /// Applies the operator to a vector, `y = M x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let band = self.bandwidth();
        Ok((0..n)
            .map(|i| {
                let lo = (i + 1).saturating_sub(band);
                (lo..=i).map(|j| self.coeffs[i - j] * x[j]).sum()
            })
            .collect())
    }
}

/// Product of two LTT operators, itself LTT: `r_j = sum_{i<=j} a_i b_{j-i}`.
pub fn ltt_multiply(a: &ToeplitzOperator, b: &ToeplitzOperator) -> Result<ToeplitzOperator> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.n(),
        });
    }
    let (ac, bc) = (a.coeffs(), b.coeffs());
    let band_a = a.bandwidth();
    let mut out = vec![0.0; n];
    if band_a > 0 {
        for (j, slot) in out.iter_mut().enumerate() {
            let hi = j.min(band_a - 1);
            *slot = (0..=hi).map(|i| ac[i] * bc[j - i]).sum();
        }
    }
    ToeplitzOperator::new(out)
}

/// Inverse of an LTT operator via the triangular recurrence
/// `r_0 = 1/a_0`, `r_j = -(1/a_0) sum_{i=1}^{j} a_i r_{j-i}`.
///
/// Runs in `O(n * w)` where `w` is the bandwidth of `a`, so banded strategy
/// matrices invert cheaply.
pub fn ltt_inverse(a: &ToeplitzOperator) -> Result<ToeplitzOperator> {
    let ac = a.coeffs();
    let a0 = ac[0];
    if a0 == 0.0 {
        return Err(Error::Singular);
    }
    let n = a.n();
    let band = a.bandwidth();
    let mut r = vec![0.0; n];
    r[0] = 1.0 / a0;
    for j in 1..n {
        let hi = j.min(band - 1);
        let mut acc = 0.0;
        for i in 1..=hi {
            acc += ac[i] * r[j - i];
        }
        r[j] = -acc / a0;
    }
    ToeplitzOperator::new(r)
}

/// First-column norms `(l1, l2)`.
///
/// For nonnegative coefficients these are `||M||_{1->1}` and `||M||_{1->2}`:
/// the first column dominates every other column of an LTT matrix. For signed
/// coefficients the norms of the absolute values are returned, which are the
/// first-column norms but not necessarily the operator norms.
pub fn column_norms(a: &ToeplitzOperator) -> (f64, f64) {
    let l1 = a.coeffs().iter().map(|v| v.abs()).sum();
    let l2 = a.coeffs().iter().map(|v| v * v).sum::<f64>().sqrt();
    (l1, l2)
}

/// Dense row-major lower-triangular matrix, used by test oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Materializes the operator with the default cap of [`DENSE_CAP`].
pub fn materialize_dense(a: &ToeplitzOperator) -> Result<DenseMatrix> {
    materialize_dense_capped(a, DENSE_CAP)
}

pub fn materialize_dense_capped(a: &ToeplitzOperator, cap: usize) -> Result<DenseMatrix> {
    let n = a.n();
    if n > cap {
        return Err(Error::TooLarge {
            what: "dense materialization",
            size: n,
            cap,
        });
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            data[i * n + j] = a.coeffs()[i - j];
        }
    }
    Ok(DenseMatrix { n, data })
}
