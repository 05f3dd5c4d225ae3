// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Streaming correlated-noise engine for banded-inverse factorizations.
//!
//! Step `i` releases `x_i + s (Z_i + sum_{r=1}^{p-1} w_r Z_{i-r})`, where
//! `(1, w_1, ..., w_{p-1})` is the band of `C^{-1}` and `s` the noise scale.
//! Past noise vectors are never stored: the engine keeps the generator
//! states that produced the last `p - 1` of them and regenerates them on
//! demand.
//!
//! State convention: `S_0` is the seed state, `Z_m` is drawn from `S_{m-1}`
//! and leaves the generator at `S_m`. After step `i` the ring holds
//! `S_{i-p+1}, ..., S_{i-1}` (indices clamped at zero), exactly the starting
//! points needed by the next `p - 1` steps.
//!
//! Noise terms are accumulated in ascending time order, oldest first and the
//! fresh vector last, each as `(s * w) * z`. Every implementation in this
//! module follows that order, so they agree bit-for-bit.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{gaussian_sigma, PrivacyBudget};
use crate::catalog::{inverse_band, inverse_coeffs, strategy_coeffs, FactorizationSpec};
use crate::error::{domain, Error, Result};
use crate::prng::{Philox, PrngStateToken};
use crate::sensitivity::{sens_exact, ParticipationSchema};
use crate::toeplitz::materialize_dense;

/// Caps for [`engine_dense_reference`].
pub const DENSE_REFERENCE_MAX_N: usize = 1024;
pub const DENSE_REFERENCE_MAX_DIM: usize = 64;

/// Streaming state of the noise correlator.
#[derive(Debug, Clone)]
pub struct CorrelatorState {
    spec: Option<FactorizationSpec>,
    dim: usize,
    noise_scale: f64,
    /// `w_1, ..., w_{p-1}`.
    weights: Vec<f64>,
    ring: Vec<PrngStateToken>,
    head: usize,
    step: usize,
    generator: Philox,
    scratch: Vec<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(domain("vector dimension must be at least 1"))
    } else {
        Ok(())
    }
}

impl CorrelatorState {
    /// Engine for a banded-inverse spec seeded with stream 0 of `seed`.
    pub fn new(spec: &FactorizationSpec, dim: usize, noise_scale: f64, seed: u64) -> Result<Self> {
        Self::with_generator(spec, dim, noise_scale, Philox::new(seed, 0))
    }

    pub fn with_generator(
        spec: &FactorizationSpec,
        dim: usize,
        noise_scale: f64,
        generator: Philox,
    ) -> Result<Self> {
        let band = inverse_band(spec)?.ok_or_else(|| {
            Error::Unsupported(format!("{} has no banded inverse", spec.method.name()))
        })?;
        let mut state = Self::from_inverse_band(&band, dim, noise_scale, generator)?;
        state.spec = Some(*spec);
        Ok(state)
    }

    /// Engine from a raw inverse band `(1, w_1, ..., w_{p-1})`.
    pub fn from_inverse_band(
        band: &[f64],
        dim: usize,
        noise_scale: f64,
        generator: Philox,
    ) -> Result<Self> {
        check_dim(dim)?;
        if band.first() != Some(&1.0) {
            return Err(domain("inverse band must start with a unit diagonal"));
        }
        if !noise_scale.is_finite() || noise_scale < 0.0 {
            return Err(domain(format!(
                "noise scale must be finite and >= 0, got {noise_scale}"
            )));
        }
        let weights = band[1..].to_vec();
        let seed_state = generator.state();
        Ok(Self {
            spec: None,
            dim,
            noise_scale,
            ring: vec![seed_state; weights.len()],
            weights,
            head: 0,
            step: 0,
            generator,
            scratch: vec![0.0; dim],
        })
    }

    pub fn spec(&self) -> Option<&FactorizationSpec> {
        self.spec.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Number of completed steps.
    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Stored generator states, oldest first.
    pub fn ring_states(&self) -> impl Iterator<Item = &PrngStateToken> {
        let (a, b) = self.ring.split_at(self.head);
        b.iter().chain(a.iter())
    }

    pub fn ring_len(&self) -> usize {
        self.ring.len()
    }

    /// Privatizes `x` into a new vector.
    pub fn step(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.step_in_place(&mut out)?;
        Ok(out)
    }

    /// Privatizes `x` in place. Performs no heap allocation.
    pub fn step_in_place(&mut self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let i = self.step + 1;
        let p1 = self.weights.len();
        let s = self.noise_scale;
        if p1 > 0 {
            // regenerate Z_{i-m} for m = count..1, weight w_m
            let count = (i - 1).min(p1);
            let mut gen = Philox::from_state(self.ring[self.head]);
            for m in (1..=count).rev() {
                gen.fill_gaussian(&mut self.scratch);
                let w = s * self.weights[m - 1];
                for (xv, z) in x.iter_mut().zip(&self.scratch) {
                    *xv += w * z;
                }
            }
            debug_assert_eq!(gen.state(), self.generator.state());
            self.ring[self.head] = self.generator.state();
            self.head = (self.head + 1) % p1;
        }
        self.generator.fill_gaussian(&mut self.scratch);
        let w = s * 1.0;
        for (xv, z) in x.iter_mut().zip(&self.scratch) {
            *xv += w * z;
        }
        self.step = i;
        Ok(())
    }
}

/// Engine for `spec` on `dim`-dimensional inputs, seeded from `(seed, 0)`.
pub fn engine_init(
    spec: &FactorizationSpec,
    dim: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<CorrelatorState> {
    CorrelatorState::new(spec, dim, noise_scale, seed)
}

/// Privatizes one input vector.
pub fn engine_step(state: &mut CorrelatorState, x: &[f64]) -> Result<Vec<f64>> {
    state.step(x)
}

/// Reference engine that stores the last `p - 1` noise vectors instead of
/// regenerating them.
#[derive(Debug, Clone)]
pub struct BufferedCorrelator {
    dim: usize,
    noise_scale: f64,
    weights: Vec<f64>,
    history: VecDeque<Vec<f64>>,
    generator: Philox,
}

impl BufferedCorrelator {
    pub fn new(spec: &FactorizationSpec, dim: usize, noise_scale: f64, seed: u64) -> Result<Self> {
        let band = inverse_band(spec)?.ok_or_else(|| {
            Error::Unsupported(format!("{} has no banded inverse", spec.method.name()))
        })?;
        Self::from_inverse_band(&band, dim, noise_scale, Philox::new(seed, 0))
    }

    pub fn from_inverse_band(
        band: &[f64],
        dim: usize,
        noise_scale: f64,
        generator: Philox,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            noise_scale,
            weights: band[1..].to_vec(),
            history: VecDeque::new(),
            generator,
        })
    }

    pub fn step(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let mut out = x.to_vec();
        let s = self.noise_scale;
        // history is newest-first: history[m - 1] = Z_{i-m}
        for m in (1..=self.history.len()).rev() {
            let w = s * self.weights[m - 1];
            for (o, z) in out.iter_mut().zip(&self.history[m - 1]) {
                *o += w * z;
            }
        }
        let mut fresh = vec![0.0; self.dim];
        self.generator.fill_gaussian(&mut fresh);
        let w = s * 1.0;
        for (o, z) in out.iter_mut().zip(&fresh) {
            *o += w * z;
        }
        if !self.weights.is_empty() {
            self.history.push_front(fresh);
            self.history.truncate(self.weights.len());
        }
        Ok(out)
    }
}

/// Dense oracle for zero input: draws `Z_1..Z_n` in generator order,
/// materializes `C^{-1}` and forms `s C^{-1} Z` row by row in ascending
/// column order.
pub fn engine_dense_reference(
    spec: &FactorizationSpec,
    dim: usize,
    noise_scale: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    if n > DENSE_REFERENCE_MAX_N {
        return Err(Error::TooLarge {
            what: "dense reference horizon",
            size: n,
            cap: DENSE_REFERENCE_MAX_N,
        });
    }
    if dim > DENSE_REFERENCE_MAX_DIM {
        return Err(Error::TooLarge {
            what: "dense reference dimension",
            size: dim,
            cap: DENSE_REFERENCE_MAX_DIM,
        });
    }
    check_dim(dim)?;
    let spec = FactorizationSpec::new(spec.method, n)?;
    let cinv = materialize_dense(&inverse_coeffs(&spec)?)?;
    let mut gen = Philox::new(seed, 0);
    let noise: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut z = vec![0.0; dim];
            gen.fill_gaussian(&mut z);
            z
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let mut row = vec![0.0; dim];
            for (m, z) in noise.iter().enumerate().take(i + 1) {
                let coef = cinv.get(i, m);
                if coef == 0.0 {
                    continue;
                }
                let w = noise_scale * coef;
                for (o, zv) in row.iter_mut().zip(z) {
                    *o += w * zv;
                }
            }
            row
        })
        .collect())
}

/// Monte Carlo estimate of the prefix-sum RMSE with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefixErrorEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
    pub noise_scale: f64,
}

/// Releases zero-gradient streams through the engine and measures
/// `sqrt(E ||prefix sums||_F^2 / (n dim))`.
///
/// Trial `t` uses generator stream `(seed, t)`; per-trial results are
/// reduced in trial order, so the estimate does not depend on scheduling.
pub fn simulate_prefix_error(
    spec: &FactorizationSpec,
    dim: usize,
    noise_scale: f64,
    trials: usize,
    seed: u64,
) -> Result<PrefixErrorEstimate> {
    if trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    check_dim(dim)?;
    // fail early on unsupported specs
    CorrelatorState::new(spec, dim, noise_scale, seed)?;
    let n = spec.n;
    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut engine = CorrelatorState::with_generator(
                spec,
                dim,
                noise_scale,
                Philox::new(seed, t as u64),
            )
            .expect("validated above");
            let mut x = vec![0.0; dim];
            let mut prefix = vec![0.0; dim];
            let mut total = 0.0;
            for _ in 0..n {
                x.fill(0.0);
                engine.step_in_place(&mut x).expect("dimension fixed");
                for (acc, v) in prefix.iter_mut().zip(&x) {
                    *acc += v;
                }
                total += prefix.iter().map(|v| v * v).sum::<f64>();
            }
            total / (n * dim) as f64
        })
        .collect();
    let m = trials as f64;
    let mean = per_trial.iter().sum::<f64>() / m;
    let estimate = mean.sqrt();
    let std_error = if trials > 1 && mean > 0.0 {
        let var = per_trial
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (m - 1.0);
        // delta method for the square root of the mean
        (var / m).sqrt() / (2.0 * estimate)
    } else {
        0.0
    };
    Ok(PrefixErrorEstimate {
        estimate,
        std_error,
        trials,
        noise_scale,
    })
}

/// Monte Carlo prefix-sum RMSE at the calibrated noise level
/// `sigma_{eps,delta} * sens(C)`. Converges to `rmse * sigma`.
pub fn run_prefix_release(
    spec: &FactorizationSpec,
    schema: &ParticipationSchema,
    dim: usize,
    budget: &PrivacyBudget,
    trials: usize,
    seed: u64,
) -> Result<PrefixErrorEstimate> {
    if spec.n != schema.n {
        return Err(Error::DimensionMismatch {
            expected: schema.n,
            actual: spec.n,
        });
    }
    let sens = sens_exact(&strategy_coeffs(spec)?, schema)?;
    let sigma = gaussian_sigma(budget)?;
    simulate_prefix_error(spec, dim, sigma * sens, trials, seed)
}

/// Scales `g` so that its Euclidean norm is at most `clip_norm`.
pub fn clip_in_place(g: &mut [f64], clip_norm: f64) {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        g.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Sums per-example gradients after clipping each to `clip_norm`.
pub fn aggregate_clipped<I>(grads: I, dim: usize, clip_norm: f64) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    if !(clip_norm > 0.0 && clip_norm.is_finite()) {
        return Err(domain(format!(
            "clip norm must be positive, got {clip_norm}"
        )));
    }
    let mut sum = vec![0.0; dim];
    for mut g in grads {
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: g.len(),
            });
        }
        clip_in_place(&mut g, clip_norm);
        for (s, v) in sum.iter_mut().zip(&g) {
            *s += v;
        }
    }
    Ok(sum)
}

/// One private training step: per-example gradients from `grad_fn` are
/// clipped, summed and passed through the correlator.
pub fn private_step<T, F>(
    engine: &mut CorrelatorState,
    batch: &[T],
    mut grad_fn: F,
    clip_norm: f64,
) -> Result<Vec<f64>>
where
    F: FnMut(&T) -> Vec<f64>,
{
    let mut x = aggregate_clipped(batch.iter().map(&mut grad_fn), engine.dim(), clip_norm)?;
    engine.step_in_place(&mut x)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh_noise(seed: u64, dim: usize, count: usize) -> Vec<Vec<f64>> {
        let mut g = Philox::new(seed, 0);
        (0..count)
            .map(|_| {
                let mut z = vec![0.0; dim];
                g.fill_gaussian(&mut z);
                z
            })
            .collect()
    }

    #[test]
    fn identity_is_dp_sgd() {
        let spec = FactorizationSpec::identity(8).unwrap();
        let mut e = CorrelatorState::new(&spec, 3, 2.0, 11).unwrap();
        assert_eq!(e.ring_len(), 0);
        let z = fresh_noise(11, 3, 2);
        let x = [1.0, -1.0, 0.5];
        let out = e.step(&x).unwrap();
        for t in 0..3 {
            assert_eq!(out[t], x[t] + 2.0 * z[0][t]);
        }
        let out = e.step(&x).unwrap();
        for t in 0..3 {
            assert_eq!(out[t], x[t] + 2.0 * z[1][t]);
        }
    }

    #[test]
    fn full_cancellation_band() {
        // gamma = 1 at p = 2 gives the band (1, -1)
        let band = crate::catalog::binomial_coeffs_pos_unchecked(1.0, 2);
        let mut e = CorrelatorState::from_inverse_band(&band, 2, 1.5, Philox::new(3, 0)).unwrap();
        let z = fresh_noise(3, 2, 4);
        let zero = [0.0, 0.0];
        let first = e.step(&zero).unwrap();
        assert_eq!(first, vec![1.5 * z[0][0], 1.5 * z[0][1]]);
        for i in 1..4 {
            let out = e.step(&zero).unwrap();
            for t in 0..2 {
                assert_eq!(out[t], 0.0 + -1.5 * z[i - 1][t] + 1.5 * z[i][t]);
            }
        }
    }

    #[test]
    fn lambda_structure() {
        let lambda = 0.5;
        let spec = FactorizationSpec::dp_lambda_cgd(lambda, 3).unwrap();
        let s = 0.75;
        let mut e = CorrelatorState::new(&spec, 4, s, 5).unwrap();
        let z = fresh_noise(5, 4, 3);
        let x = [0.1, 0.2, 0.3, 0.4];
        e.step(&x).unwrap();
        for i in 1..3 {
            let out = e.step(&x).unwrap();
            for t in 0..4 {
                assert_eq!(out[t], x[t] + (s * -lambda) * z[i - 1][t] + s * z[i][t]);
            }
        }
        let dense = engine_dense_reference(&spec, 4, s, 5, 3).unwrap();
        for t in 0..4 {
            assert_eq!(dense[0][t], s * z[0][t]);
            assert_eq!(dense[2][t], (s * -lambda) * z[1][t] + s * z[2][t]);
        }
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let spec = FactorizationSpec::gamma_bifr(0.4, 5, 32).unwrap();
        let mut a = CorrelatorState::new(&spec, 6, 1.0, 99).unwrap();
        let mut b = CorrelatorState::new(&spec, 6, 1.0, 99).unwrap();
        let mut c = CorrelatorState::new(&spec, 6, 1.0, 100).unwrap();
        let x = vec![0.25; 6];
        let mut differs = false;
        for _ in 0..32 {
            let (oa, ob, oc) = (
                a.step(&x).unwrap(),
                b.step(&x).unwrap(),
                c.step(&x).unwrap(),
            );
            assert_eq!(oa, ob);
            differs |= oa != oc;
        }
        assert!(differs);
    }

    #[test]
    fn ring_holds_expected_states() {
        let p = 4;
        let dim = 5;
        let spec = FactorizationSpec::gamma_bifr(0.5, p, 20).unwrap();
        let mut e = CorrelatorState::new(&spec, dim, 1.0, 1).unwrap();
        let s0 = Philox::new(1, 0);
        let state_at = |m: usize| {
            let mut g = s0;
            g.skip_blocks(crate::prng::blocks_per_vector(dim) * m as u128);
            g.state()
        };
        for i in 1..=10usize {
            e.step(&vec![0.0; dim]).unwrap();
            let want: Vec<_> = (1..p)
                .map(|r| state_at((i + r).saturating_sub(p)))
                .collect();
            let got: Vec<_> = e.ring_states().copied().collect();
            assert_eq!(got, want, "after step {i}");
        }
    }

    #[test]
    fn buffered_and_dense_agree_bitwise() {
        let n = 64;
        let spec = FactorizationSpec::gamma_bifr(0.5, 5, n).unwrap();
        let (dim, s, seed) = (4, 0.9, 2024);
        let mut a = CorrelatorState::new(&spec, dim, s, seed).unwrap();
        let mut b = BufferedCorrelator::new(&spec, dim, s, seed).unwrap();
        let dense = engine_dense_reference(&spec, dim, s, seed, n).unwrap();
        let zero = vec![0.0; dim];
        for row in dense {
            let oa = a.step(&zero).unwrap();
            let ob = b.step(&zero).unwrap();
            assert_eq!(oa, ob);
            assert_eq!(oa, row);
        }
    }

    #[test]
    fn nonzero_input_is_added() {
        let n = 16;
        let spec = FactorizationSpec::gamma_bifr(0.3, 3, n).unwrap();
        let mut zero_engine = CorrelatorState::new(&spec, 2, 1.0, 8).unwrap();
        let mut e = CorrelatorState::new(&spec, 2, 1.0, 8).unwrap();
        for i in 0..n {
            let x = [i as f64, -(i as f64)];
            let noise = zero_engine.step(&[0.0, 0.0]).unwrap();
            let out = e.step(&x).unwrap();
            for t in 0..2 {
                assert!((out[t] - (x[t] + noise[t])).abs() <= 1e-12 * (1.0 + x[t].abs()));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let banded = FactorizationSpec::gamma_bfr(0.5, 3, 8).unwrap();
        assert!(matches!(
            CorrelatorState::new(&banded, 2, 1.0, 0),
            Err(Error::Unsupported(_))
        ));
        let spec = FactorizationSpec::identity(8).unwrap();
        assert!(CorrelatorState::new(&spec, 0, 1.0, 0).is_err());
        let mut e = CorrelatorState::new(&spec, 2, 1.0, 0).unwrap();
        assert!(matches!(
            e.step(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(engine_dense_reference(&spec, 65, 1.0, 0, 8).is_err());
        assert!(engine_dense_reference(&spec, 2, 1.0, 0, 1025).is_err());
    }

    #[test]
    fn zero_noise_scale_gives_zero_error() {
        let spec = FactorizationSpec::gamma_bifr(0.5, 4, 16).unwrap();
        let est = simulate_prefix_error(&spec, 3, 0.0, 10, 1).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(simulate_prefix_error(&spec, 3, 1.0, 0, 1).is_err());
    }

    #[test]
    fn identity_noise_has_zero_mean() {
        let spec = FactorizationSpec::identity(4000).unwrap();
        let mut e = CorrelatorState::new(&spec, 1, 1.0, 17).unwrap();
        let sum: f64 = (0..4000).map(|_| e.step(&[0.0]).unwrap()[0]).sum();
        assert!((sum / 4000.0).abs() < 5.0 / 4000f64.sqrt());
    }

    #[test]
    fn clipping_adapter() {
        let grads = vec![vec![3.0, 4.0], vec![0.3, 0.4]];
        let sum = aggregate_clipped(grads, 2, 1.0).unwrap();
        assert!((sum[0] - 0.9).abs() < 1e-15 && (sum[1] - 1.2).abs() < 1e-15);
        assert!(aggregate_clipped(vec![vec![1.0]], 2, 1.0).is_err());
        assert!(aggregate_clipped(Vec::<Vec<f64>>::new(), 2, 0.0).is_err());

        let spec = FactorizationSpec::identity(4).unwrap();
        let mut engine = CorrelatorState::new(&spec, 2, 0.0, 0).unwrap();
        let batch = [1.0f64, 2.0, 3.0];
        let out = private_step(&mut engine, &batch, |&a| vec![a, 0.0], 1.5).unwrap();
        assert_eq!(out, vec![1.0 + 1.5 + 1.5, 0.0]);
    }
}
