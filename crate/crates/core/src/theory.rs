// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Numerical checks of the exact-constant inequalities behind the error
//! analysis of banded-inverse fractional-root factorizations.
//!
//! Each suite returns a [`CheckReport`]. Margins are relative,
//! `(bound - quantity) / |bound|`, so a suite passes when every margin is at
//! least `-CHECK_TOL`. Strict inequalities are tested as non-strict ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    binomial_coeffs_neg_unchecked, binomial_coeffs_pos_unchecked, strategy_from_inverse_band,
};
use crate::catalog::{strategy_coeffs, FactorizationSpec};
use crate::error::{domain, Result};
use crate::metrics::{frobenius_ltt, rmse};
use crate::sensitivity::{sens_exact, ParticipationSchema};
use crate::special::{gamma, harmonic, harmonic_bound};
use crate::toeplitz::{column_norms, ToeplitzOperator};

/// Relative slack allowed on every inequality.
pub const CHECK_TOL: f64 = 1e-12;

/// Number of violations listed in a report.
const MAX_DETAILS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: String,
    pub grid_size: usize,
    pub violations: usize,
    /// Smallest relative margin; negative means the bound was exceeded.
    pub worst_margin: f64,
    /// Violating parameter tuples, truncated.
    pub details: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// One evaluated inequality.
struct Sample {
    margin: f64,
    label: String,
}

fn relative_margin(bound: f64, quantity: f64) -> f64 {
    let scale = bound.abs().max(f64::MIN_POSITIVE);
    (bound - quantity) / scale
}

/// Collects `quantity <= bound` samples; labels are only built for violations.
#[derive(Default)]
struct Tally {
    count: usize,
    worst: Option<f64>,
    violations: Vec<Sample>,
    violation_count: usize,
}

impl Tally {
    fn le(&mut self, quantity: f64, bound: f64, tol: f64, label: impl FnOnce() -> String) {
        let margin = if quantity.is_nan() || bound.is_nan() {
            f64::NEG_INFINITY
        } else {
            relative_margin(bound, quantity)
        };
        self.push(margin, tol, label);
    }

    fn push(&mut self, margin: f64, tol: f64, label: impl FnOnce() -> String) {
        self.count += 1;
        self.worst = Some(self.worst.map_or(margin, |w: f64| w.min(margin)));
        if margin < -tol {
            self.violation_count += 1;
            if self.violations.len() < MAX_DETAILS {
                self.violations.push(Sample {
                    margin,
                    label: label(),
                });
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.count += other.count;
        self.worst = match (self.worst, other.worst) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.violation_count += other.violation_count;
        let room = MAX_DETAILS - self.violations.len();
        self.violations
            .extend(other.violations.into_iter().take(room));
        self
    }

    fn report(self, suite: &str) -> CheckReport {
        CheckReport {
            suite: suite.to_string(),
            grid_size: self.count,
            violations: self.violation_count,
            worst_margin: self.worst.unwrap_or(f64::INFINITY),
            details: self
                .violations
                .into_iter()
                .map(|s| format!("{} (margin {:.3e})", s.label, s.margin))
                .collect(),
        }
    }
}

/// Runs `f` over `items` in parallel, merging tallies in input order.
fn par_tally<T: Sync>(items: &[T], f: impl Fn(&T, &mut Tally) + Sync) -> Tally {
    items
        .par_iter()
        .map(|item| {
            let mut t = Tally::default();
            f(item, &mut t);
            t
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge)
}

fn check_gamma_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(domain("gamma grid is empty"));
    }
    match grid.iter().find(|&&g| !(g > 0.0 && g < 1.0)) {
        Some(g) => Err(domain(format!(
            "gamma grid values must lie in (0, 1), got {g}"
        ))),
        None => Ok(()),
    }
}

fn check_bandwidth_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(domain("bandwidth grid is empty"));
    }
    match grid.iter().find(|&&p| p < 2) {
        Some(p) => Err(domain(format!("bandwidths must be at least 2, got {p}"))),
        None => Ok(()),
    }
}

/// Two-sided power-law bounds on both binomial sequences:
///
/// * `1/(G(g) (j+1)^{1-g}) <= (c_g)_j <= 1/(G(g) j^{1-g})` for `j >= 1`,
/// * `g/(G(1-g) j^{1+g}) <= |(c~_g)_j| <= g/(G(1-g) j (j-1)^g)` for `j >= 2`.
pub fn check_coeff_bounds(gamma_grid: &[f64], j_max: usize) -> Result<CheckReport> {
    check_gamma_grid(gamma_grid)?;
    if j_max < 2 {
        return Err(domain("j_max must be at least 2"));
    }
    let tally = par_tally(gamma_grid, |&g, t| {
        let c = binomial_coeffs_neg_unchecked(g, j_max + 1);
        let ct = binomial_coeffs_pos_unchecked(g, j_max + 1);
        let (ga, gb) = (gamma(g), gamma(1.0 - g));
        for j in 1..=j_max {
            let jf = j as f64;
            let lo = 1.0 / (ga * (jf + 1.0).powf(1.0 - g));
            let hi = 1.0 / (ga * jf.powf(1.0 - g));
            t.le(lo, c[j], CHECK_TOL, || format!("c lower: gamma={g}, j={j}"));
            t.le(c[j], hi, CHECK_TOL, || format!("c upper: gamma={g}, j={j}"));
            if j >= 2 {
                let a = ct[j].abs();
                let lo = g / (gb * jf.powf(1.0 + g));
                let hi = g / (gb * jf * (jf - 1.0).powf(g));
                t.le(lo, a, CHECK_TOL, || format!("c~ lower: gamma={g}, j={j}"));
                t.le(a, hi, CHECK_TOL, || format!("c~ upper: gamma={g}, j={j}"));
            }
        }
    });
    Ok(tally.report("coeff-bounds"))
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn add(self, o: Dd) -> Self {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let s = Dd::quick_two_sum(s.hi, s.lo + t.hi);
        Dd::quick_two_sum(s.hi, s.lo + t.lo)
    }

    fn mul(self, o: Dd) -> Self {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::quick_two_sum(p, err + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let r = self
            .add(Dd::from(-q1 * d))
            .add(Dd::from(-q1.mul_add(d, -(q1 * d))));
        let q2 = r.hi / d;
        Dd::quick_two_sum(q1, q2)
    }
}

/// The prefix sums of `(1 - x)^g` equal the coefficients of `(1 - x)^{-(1-g)}`.
///
/// Both sides are evaluated in double-double arithmetic from their
/// recurrences: for `g` near 1 the prefix sum cancels to `O(j^{-g})` and a
/// plain `f64` evaluation loses more than the tested tolerance.
pub fn check_prefix_identity(gamma_grid: &[f64], j_max: usize) -> Result<CheckReport> {
    check_gamma_grid(gamma_grid)?;
    let tally = par_tally(gamma_grid, |&g, t| {
        let neg_g = Dd::from(-g);
        let one_minus_g = Dd::two_sum(1.0, -g);
        let mut term = Dd::from(1.0);
        let mut prefix = Dd::from(1.0);
        let mut target = Dd::from(1.0);
        t.le((prefix.hi - target.hi).abs(), 0.0, CHECK_TOL, || {
            format!("gamma={g}, j=0")
        });
        for j in 1..=j_max {
            let jf = j as f64;
            // term_j = term_{j-1} (j - 1 - g) / j
            term = term.mul(Dd::from(jf - 1.0).add(neg_g)).div_f64(jf);
            prefix = prefix.add(term);
            // target_j = target_{j-1} (1 - g + j - 1) / j
            target = target.mul(one_minus_g.add(Dd::from(jf - 1.0))).div_f64(jf);
            let diff = prefix.add(Dd {
                hi: -target.hi,
                lo: -target.lo,
            });
            let rel = (diff.hi + diff.lo).abs() / target.hi.abs();
            t.push(-rel, CHECK_TOL, || format!("gamma={g}, j={j}"));
        }
    });
    Ok(tally.report("prefix-identity"))
}

/// Geometric decay rate of the banded-inverse strategy beyond its bandwidth:
/// the smaller of `(1-g)/(2p) ln(2p/(p+1))` and `(1-g)/(8 p^g (p-1)^{1-g})`.
pub fn tail_decay_rate(g: f64, p: usize) -> f64 {
    let pf = p as f64;
    let t1 = (1.0 - g) / (2.0 * pf) * (2.0 * pf / (pf + 1.0)).ln();
    let t2 = (1.0 - g) / (8.0 * pf.powf(g) * (pf - 1.0).powf(1.0 - g));
    t1.min(t2)
}

/// Monotonicity of the strategy coefficients, their geometric tail bound
/// `c_j <= (c_g)_p (1 - beta)^{j-p}` for `j >= p`, and
/// `(1-g)/(8p) <= beta <= (1-g)/(4p)`.
pub fn check_monotone_tail(gamma_grid: &[f64], p_grid: &[usize], n: usize) -> Result<CheckReport> {
    check_gamma_grid(gamma_grid)?;
    check_bandwidth_grid(p_grid)?;
    if let Some(p) = p_grid.iter().find(|&&p| p > n) {
        return Err(domain(format!("bandwidth {p} exceeds n = {n}")));
    }
    let cells: Vec<(f64, usize)> = gamma_grid
        .iter()
        .flat_map(|&g| p_grid.iter().map(move |&p| (g, p)))
        .collect();
    let tally = par_tally(&cells, |&(g, p), t| {
        let band = binomial_coeffs_pos_unchecked(g, p);
        let c = strategy_from_inverse_band(&band, n);
        let cg_p = binomial_coeffs_neg_unchecked(g, p + 1)[p];
        let beta = tail_decay_rate(g, p);
        let pf = p as f64;
        t.le((1.0 - g) / (8.0 * pf), beta, CHECK_TOL, || {
            format!("rate lower: gamma={g}, p={p}")
        });
        t.le(beta, (1.0 - g) / (4.0 * pf), CHECK_TOL, || {
            format!("rate upper: gamma={g}, p={p}")
        });
        for j in 0..n {
            if j + 1 < n {
                // margins relative to the diagonal, which is 1
                t.push(c[j + 1], CHECK_TOL, || {
                    format!("nonneg: gamma={g}, p={p}, j={}", j + 1)
                });
                t.push(c[j] - c[j + 1], CHECK_TOL, || {
                    format!("monotone: gamma={g}, p={p}, j={j}")
                });
            }
            if j >= p {
                let bound = cg_p * (1.0 - beta).powi((j - p) as i32);
                t.le(c[j], bound, CHECK_TOL, || {
                    format!("tail: gamma={g}, p={p}, j={j}")
                });
            }
        }
    });
    Ok(tally.report("monotone-tail"))
}

/// Exact-constant bounds on `||B||_F^2`, `||C||_{1->2}^2` and `||C||_{1->1}`,
/// plus the closed-form harmonic-sum bounds for `s` in `{1/2, 1, 2}` and
/// `m <= 10^4`.
pub fn check_norm_bounds(
    gamma_grid: &[f64],
    p_grid: &[usize],
    n_grid: &[usize],
) -> Result<CheckReport> {
    check_gamma_grid(gamma_grid)?;
    check_bandwidth_grid(p_grid)?;
    if n_grid.is_empty() {
        return Err(domain("horizon grid is empty"));
    }
    let cells: Vec<(f64, usize, usize)> = gamma_grid
        .iter()
        .flat_map(|&g| {
            p_grid.iter().flat_map(move |&p| {
                n_grid
                    .iter()
                    .filter(move |&&n| n >= p)
                    .map(move |&n| (g, p, n))
            })
        })
        .collect();
    let mut tally = par_tally(&cells, |&(g, p, n), t| {
        let band = binomial_coeffs_pos_unchecked(g, p);
        let c = ToeplitzOperator::new(strategy_from_inverse_band(&band, n))
            .expect("finite coefficients");
        let sums: Vec<f64> = band
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let mut b = sums.clone();
        b.resize(n, *sums.last().expect("p >= 2"));
        let frob_sq =
            frobenius_ltt(&ToeplitzOperator::new(b).expect("finite coefficients")).powi(2);
        let (l1, l2) = column_norms(&c);

        let (nf, pf) = (n as f64, p as f64);
        let (ga, gb) = (gamma(g), gamma(1.0 - g));
        let beta = tail_decay_rate(g, p);
        let frob_bound = nf
            + nf * harmonic(p - 1, 2.0 * g) / (gb * gb)
            + (nf - pf) * (nf - pf + 1.0) / (2.0 * gb * gb * (pf - 1.0).powf(2.0 * g));
        let l2_bound = 1.0
            + harmonic(p - 1, 2.0 - 2.0 * g) / (ga * ga)
            + 1.0 / (ga * ga * pf.powf(2.0 - 2.0 * g) * beta * (2.0 - beta));
        let l1_bound = 1.0 + harmonic(p - 1, 1.0 - g) / ga + 1.0 / (ga * pf.powf(1.0 - g) * beta);
        t.le(frob_sq, frob_bound, CHECK_TOL, || {
            format!("frobenius: gamma={g}, p={p}, n={n}")
        });
        t.le(l2 * l2, l2_bound, CHECK_TOL, || {
            format!("l2: gamma={g}, p={p}, n={n}")
        });
        t.le(l1, l1_bound, CHECK_TOL, || {
            format!("l1: gamma={g}, p={p}, n={n}")
        });
    });
    for s in [0.5, 1.0, 2.0] {
        let mut h = 0.0;
        for m in 1..=10_000usize {
            h += (m as f64).powf(-s);
            tally.le(h, harmonic_bound(m, s), CHECK_TOL, || {
                format!("harmonic: s={s}, m={m}")
            });
        }
    }
    Ok(tally.report("norm-bounds"))
}

/// A sensitivity-bound test instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensInstance {
    pub spec: FactorizationSpec,
    pub schema: ParticipationSchema,
}

/// `count` seeded random instances over the catalog with `n <= n_max`.
pub fn random_sens_instances(count: usize, n_max: usize, seed: u64) -> Result<Vec<SensInstance>> {
    if n_max < 2 {
        return Err(domain("n_max must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(2..=n_max);
            let p = rng.gen_range(1..=n);
            let g = rng.gen_range(0.01..0.99);
            let spec = match i % 4 {
                0 | 1 => FactorizationSpec::gamma_bifr(g, p, n),
                2 => FactorizationSpec::gamma_bfr(g, p, n),
                _ => FactorizationSpec::dp_lambda_cgd(rng.gen_range(0.0..0.99), n),
            }?;
            let b = rng.gen_range(1..=n);
            let k = rng.gen_range(1..=(n - 1) / b + 1);
            Ok(SensInstance {
                spec,
                schema: ParticipationSchema::new(n, b, k)?,
            })
        })
        .collect()
}

/// `sens^2 <= k ||C||_{1->2}^2 + (k/b) ||C||_{1->1}^2` on every instance.
pub fn check_sens_bound(instances: &[SensInstance]) -> Result<CheckReport> {
    if let Some(bad) = instances.iter().find(|i| i.spec.n != i.schema.n) {
        return Err(domain(format!(
            "instance {} does not match n = {}",
            bad.spec, bad.schema.n
        )));
    }
    let results: Vec<Result<Tally>> = instances
        .par_iter()
        .map(|inst| {
            let mut t = Tally::default();
            let c = strategy_coeffs(&inst.spec)?;
            let sens = sens_exact(&c, &inst.schema)?;
            let (l1, l2) = column_norms(&c);
            let (k, b) = (inst.schema.k as f64, inst.schema.b as f64);
            t.le(
                sens * sens,
                k * l2 * l2 + k / b * l1 * l1,
                CHECK_TOL,
                || {
                    format!(
                        "{} with b={}, k={}",
                        inst.spec, inst.schema.b, inst.schema.k
                    )
                },
            );
            Ok(t)
        })
        .collect();
    let mut tally = Tally::default();
    for r in results {
        tally = tally.merge(r?);
    }
    Ok(tally.report("sens-bound"))
}

/// Which asymptotic regime an envelope row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeBranch {
    /// `g = 1 - p / sqrt(n)` with `p <= sqrt(n) / 4`, against
    /// `sqrt(k) n^{1/4} + sqrt(n k / b)`.
    SmallBandwidth,
    /// `g = 1/2`, against
    /// `sqrt(k) ln p + sqrt(n k / b) + sqrt(n k ln p / p) + sqrt(k p ln p / b)`.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub branch: EnvelopeBranch,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub rmse: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Ratios of the measured RMSE to the asymptotic envelopes. `b` defaults to
/// `n / k` per horizon.
pub fn envelope_rows(
    n_grid: &[usize],
    p_grid: &[usize],
    k: usize,
    b: Option<usize>,
) -> Result<Vec<EnvelopeRow>> {
    check_bandwidth_grid(p_grid)?;
    let mut cells = Vec::new();
    for &n in n_grid {
        let root = (n as f64).sqrt();
        for &p in p_grid {
            if (p as f64) <= root / 4.0 {
                cells.push((EnvelopeBranch::SmallBandwidth, n, p, 1.0 - p as f64 / root));
            }
        }
        for &p in p_grid {
            if p <= n {
                cells.push((EnvelopeBranch::Half, n, p, 0.5));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(branch, n, p, g)| {
            let b = b.unwrap_or((n / k).max(1));
            let schema = ParticipationSchema::new(n, b, k)?;
            let spec = FactorizationSpec::gamma_bifr(g, p, n)?;
            let value = rmse(&spec, &schema)?.rmse;
            let (nf, pf, kf, bf) = (n as f64, p as f64, k as f64, b as f64);
            let envelope = match branch {
                EnvelopeBranch::SmallBandwidth => kf.sqrt() * nf.powf(0.25) + (nf * kf / bf).sqrt(),
                EnvelopeBranch::Half => {
                    let lp = pf.ln();
                    kf.sqrt() * lp
                        + (nf * kf / bf).sqrt()
                        + (nf * kf * lp / pf).sqrt()
                        + (kf * pf * lp / bf).sqrt()
                }
            };
            Ok(EnvelopeRow {
                branch,
                n,
                p,
                gamma: g,
                rmse: value,
                envelope,
                ratio: value / envelope,
            })
        })
        .collect()
}

/// Envelope stability: within each branch the largest ratio is at most
/// three times the median ratio. Per-row margins are
/// `(3 median - ratio) / (3 median)`.
pub fn check_error_envelope(
    n_grid: &[usize],
    p_grid: &[usize],
    k: usize,
    b: Option<usize>,
) -> Result<CheckReport> {
    let rows = envelope_rows(n_grid, p_grid, k, b)?;
    let mut tally = Tally::default();
    for branch in [EnvelopeBranch::SmallBandwidth, EnvelopeBranch::Half] {
        let branch_rows: Vec<&EnvelopeRow> = rows.iter().filter(|r| r.branch == branch).collect();
        if branch_rows.is_empty() {
            continue;
        }
        let mut ratios: Vec<f64> = branch_rows.iter().map(|r| r.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let mid = ratios.len() / 2;
        let median = if ratios.len() % 2 == 1 {
            ratios[mid]
        } else {
            0.5 * (ratios[mid - 1] + ratios[mid])
        };
        for r in branch_rows {
            tally.le(r.ratio, 3.0 * median, 0.0, || {
                format!(
                    "{branch:?}: n={}, p={}, ratio={:.4}, median={median:.4}",
                    r.n, r.p, r.ratio
                )
            });
        }
    }
    Ok(tally.report("error-envelope"))
}
