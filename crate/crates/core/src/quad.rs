//! One-dimensional quadrature: adaptive Gauss–Kronrod and periodic trapezoid refinement.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let hl = (b - a) * half;
    let fc = f(c);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for k in 0..7 {
        let dx = hl * T::lit(XGK[k]);
        let pair = f(c - dx) + f(c + dx);
        kron = kron + pair * T::lit(WGK[k]);
        if k % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[k / 2]);
        }
    }
    (kron * hl, ((kron - gauss) * hl).abs())
}

/// Adaptive Gauss–Kronrod 7/15 with global error control.
///
/// Returns `(integral, error estimate)`; fails when `max_intervals` bisections do not reach `tol`
/// (interpreted relative to the integral's magnitude, with an absolute floor of `tol`).
pub fn adaptive_gk<T: Real>(f: impl Fn(T) -> T, a: T, b: T, tol: T, max_intervals: usize) -> Result<(T, T)> {
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    loop {
        let total: T = parts.iter().map(|p| p.2 .0).sum();
        let err: T = parts.iter().map(|p| p.2 .1).sum();
        let target = tol * total.abs().max(T::one());
        let floor = T::epsilon() * T::lit(50.0) * total.abs().max(T::one());
        if err <= target || err <= floor {
            return Ok((total, err));
        }
        if parts.len() >= max_intervals {
            return Err(Error::Tolerance(format!(
                "adaptive quadrature stalled at error {err} after {} intervals",
                parts.len()
            )));
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let (l, r, _) = parts.swap_remove(worst);
        let m = (l + r) * T::lit(0.5);
        parts.push((l, m, gk15(&f, l, m)));
        parts.push((m, r, gk15(&f, m, r)));
    }
}

/// Trapezoid rule of a `2π`-periodic function with sample doubling.
///
/// Starts at `n0` samples and doubles until two successive estimates differ by at most `tol`.
/// The returned error estimate is that difference.
pub fn periodic_trapezoid<T: Real>(
    f: impl Fn(T) -> T,
    n0: usize,
    tol: T,
    max_samples: usize,
) -> Result<(T, T, usize)> {
    let tau = T::two_pi();
    let mut n = n0.max(4);
    let mut sum: T = (0..n).map(|k| f(tau * T::lit(k as f64 / n as f64))).sum();
    let mut est = sum * tau / T::lit(n as f64);
    loop {
        if 2 * n > max_samples {
            return Err(Error::Tolerance(format!("circle quadrature did not converge within {max_samples} samples")));
        }
        // odd samples of the doubled rule
        let odd: T = (0..n).map(|k| f(tau * T::lit((2 * k + 1) as f64 / (2 * n) as f64))).sum();
        sum = sum + odd;
        n *= 2;
        let next = sum * tau / T::lit(n as f64);
        let diff = (next - est).abs();
        est = next;
        if diff <= tol {
            return Ok((est, diff, n));
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}
