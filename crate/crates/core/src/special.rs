//! Special functions: the standard normal distribution and the Riemann zeta function.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Phi(x)` via the complementary error function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `Phi^{-1}(w)` for `w` in the open unit interval.
pub fn inverse_normal_cdf(w: f64) -> Result<f64> {
    if !(w > 0.0 && w < 1.0) {
        return invalid(format!("inverse normal CDF argument {w} outside (0, 1)"));
    }
    Ok(inverse_normal_cdf_unchecked(w))
}

/// Rational approximation (relative error ~1e-9) refined by one Newton step
/// against the erfc-based CDF. The upper half is mapped to the lower half,
/// where `1 - w` is exact.
pub(crate) fn inverse_normal_cdf_unchecked(w: f64) -> f64 {
    if w > 0.5 {
        return -inverse_normal_cdf_unchecked(1.0 - w);
    }
    let x = rational_guess(w);
    x - (normal_cdf(x) - w) / normal_pdf(x)
}

fn rational_guess(w: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    if w < 0.024_25 {
        let q = (-2.0 * w.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = w - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

// B_2, B_4, ..., B_20
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174_611.0 / 330.0,
];

/// `zeta(x) = sum_k k^(-x)` for real `x > 1`, by Euler-Maclaurin summation
/// with a 16-term head.
pub fn riemann_zeta(x: f64) -> Result<f64> {
    if !(x > 1.0) || !x.is_finite() {
        return invalid(format!("zeta requires a finite argument > 1, got {x}"));
    }
    const N: usize = 16;
    let head: f64 = (1..N).rev().map(|k| (k as f64).powf(-x)).sum();
    let nf = N as f64;
    let mut tail = nf.powf(1.0 - x) / (x - 1.0) + 0.5 * nf.powf(-x);
    // rising factorial x (x+1) ... (x+2j-2) / (2j)!  times N^(-x-2j+1)
    let mut coeff = x / 2.0; // j = 1: x / 2!
    let mut power = nf.powf(-x - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b * coeff * power;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let jj = (j + 1) as f64; // current j
        coeff *= (x + 2.0 * jj - 1.0) * (x + 2.0 * jj) / ((2.0 * jj + 1.0) * (2.0 * jj + 2.0));
        power /= nf * nf;
    }
    Ok(head + tail)
}
