// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Special functions: Gamma, the standard normal CDF and its inverse, and
//! generalized harmonic sums.

use std::f64::consts::PI;

// Lanczos approximation, g = 7, nine terms.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// The Gamma function for real arguments, with reflection below `1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Standard normal CDF, `Phi(x) = erfc(-x / sqrt 2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

// Rational approximation of the normal quantile (Acklam), relative error
// about 1e-9 before refinement.
#[allow(clippy::excessive_precision)]
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Inverse of the standard normal CDF on `(0, 1)`.
///
/// One Halley step against `erfc` brings the rational approximation to full
/// double precision. The computation is branch-deterministic, so equal inputs
/// always give bit-equal outputs.
pub fn normal_quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    const LOW: f64 = 0.02425;
    let x = if u < LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    } else if u <= 1.0 - LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    };
    // Halley refinement; for u > 1/2 work on the upper tail to keep precision.
    let (e, sign) = if u <= 0.5 {
        (normal_cdf(x) - u, 1.0)
    } else {
        (
            0.5 * libm::erfc(x / std::f64::consts::SQRT_2) - (1.0 - u),
            -1.0,
        )
    };
    let step = sign * e * (2.0 * PI).sqrt() * (x * x / 2.0).exp();
    x - step / (1.0 + x * step / 2.0)
}

/// Generalized harmonic sum `H_m^{(s)} = sum_{r=1}^{m} r^{-s}`.
pub fn harmonic(m: usize, s: f64) -> f64 {
    (1..=m).map(|r| (r as f64).powf(-s)).sum()
}

/// Closed-form upper bound on `H_m^{(s)}` from the integral comparison:
/// `m^{1-s}/(1-s)` for `s < 1`, `1 + ln m` for `s = 1`, `1 + 1/(s-1)` for `s > 1`.
pub fn harmonic_bound(m: usize, s: f64) -> f64 {
    let m = m as f64;
    if s < 1.0 {
        m.powf(1.0 - s) / (1.0 - s)
    } else if s == 1.0 {
        1.0 + m.ln()
    } else {
        1.0 + 1.0 / (s - 1.0)
    }
}
