// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Banded-inverse correlated-noise factorizations for private prefix sums.
//!
//! Lower-triangular Toeplitz (LTT) operators are represented by their first
//! column. A factorization `A = B C` of the prefix-sum matrix is described by
//! a [`FactorizationSpec`]; the strategy `C` determines sensitivity and
//! `B = A C^{-1}` the error. For the banded-inverse methods the noise engine
//! releases `x_i + s (C^{-1} Z)_i` in `O(p d)` time and `O(d + p)` memory.

pub mod calibration;
pub mod catalog;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod prng;
pub mod sensitivity;
pub mod special;
pub mod theory;
pub mod toeplitz;
pub mod tuner;

pub use calibration::{gaussian_sigma, PrivacyBudget};
pub use catalog::{inverse_band, inverse_coeffs, strategy_coeffs, FactorizationSpec, Method};
pub use engine::{
    engine_dense_reference, engine_init, engine_step, run_prefix_release, simulate_prefix_error,
    BufferedCorrelator, CorrelatorState, PrefixErrorEstimate,
};
pub use error::{Error, Result};
pub use metrics::{b_operator, rmse, rmse_with_budget, RmseReport};
pub use prng::{Philox, PrngStateToken};
pub use sensitivity::{sens_bruteforce, sens_exact, sens_upper_bound, ParticipationSchema};
pub use toeplitz::{column_norms, ltt_inverse, ltt_multiply, materialize_dense, ToeplitzOperator};
pub use tuner::{compare, sweep, SweepParam, SweepResult};
