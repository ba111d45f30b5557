//! Log-gamma, digamma, log-beta and log-domain summation.

use std::f64::consts::PI;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Gamma(x)` for `x > 0`.
///
/// Shifts the argument to `x >= 12` and applies the Stirling series.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut z = x;
    let mut prod = 1.0;
    let mut shift = 0.0;
    while z < 12.0 {
        prod *= z;
        z += 1.0;
        if prod > 1e280 {
            shift += prod.ln();
            prod = 1.0;
        }
    }
    shift += prod.ln();
    stirling(z) - shift
}

fn stirling(z: f64) -> f64 {
    // B_{2k} / (2k (2k-1))
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let r = 1.0 / z;
    let r2 = r * r;
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * r2 + c;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series * r
}

/// Digamma `psi(x) = d/dx ln Gamma(x)`.
///
/// Uses reflection for `x < 0`, upward recurrence to `x >= 12` and the
/// asymptotic expansion.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || (x <= 0.0 && x == x.floor()) {
        return f64::NAN;
    }
    if x < 0.0 {
        return digamma(1.0 - x) - PI / (PI * x).tan();
    }
    let mut z = x;
    let mut acc = 0.0;
    while z < 12.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    // B_{2k} / (2k)
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32_760.0,
        1.0 / 12.0,
    ];
    let r2 = 1.0 / (z * z);
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * r2 + c;
    }
    acc + z.ln() - 0.5 / z - series * r2
}

/// `ln B(a, b)` for `a, b > 0`. Symmetric in its arguments bit for bit.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    ln_gamma(lo) + ln_gamma(hi) - ln_gamma(lo + hi)
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln sum_i e^{x_i}`; `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
