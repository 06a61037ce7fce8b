//! Dipole currents of finite mass whose boundary is not the divergence of an `L^p` field.
//!
//! Dipole `i` is a segment of length `aᵢ` inside a ball of radius `aᵢ`, with endpoint balls of
//! radius `aᵢ/2`. Any field with `div V = ∂I` has `∫_{B(x, aᵢ/2)} |V|^p ≥ κ_p (aᵢ/2)^{2−p}` around
//! each endpoint, `κ_p = (2π)^{1−p}/(2−p)`, attained by `(1/2πρ) r̂`. The radii are chosen with
//! `Σ aᵢ ≤ 2` and `Σ aᵢ^{2−p} = ∞`. Fields normalized as `div V = 2π ∂I` pick up a factor
//! `(2π)^p` in every bound.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::currents::{Piece, PolylineCurrent};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::lifting::{Charge, ChargeSet};
use crate::scalar::Real;

/// `6/π² · 2`, so that `Σ c/i² = 2`.
pub const INVERSE_SQUARE_CONSTANT: f64 = 12.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// Radius law `i ↦ aᵢ` before the cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusLaw {
    /// `c/i²`, `c = 12/π²`; `Σ aᵢ^{2−p}` diverges for `p ≥ 3/2`.
    InverseSquare,
    /// `c'/(i ln²(i+1))` with `c'` fixed numerically so the series sums to 2; diverges for `p > 1`.
    LogSquared { constant: f64 },
}

impl RadiusLaw {
    pub fn for_exponent(p: f64) -> Self {
        if p >= 1.5 {
            RadiusLaw::InverseSquare
        } else {
            RadiusLaw::LogSquared { constant: log_squared_constant() }
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        let x = i as f64;
        match *self {
            RadiusLaw::InverseSquare => INVERSE_SQUARE_CONSTANT / (x * x),
            RadiusLaw::LogSquared { constant } => constant / (x * (x + 1.0).ln().powi(2)),
        }
    }
}

/// `c'` with `Σ_{i≥1} c'/(i ln²(i+1)) = 2`.
///
/// Direct sum to `M = 10⁶` plus the tail `∫_M^∞ dx/(x ln²(x+1)) − f(M)/2`; the tail integral is
/// `1/ln(M+1)` up to `O(1/(M ln³ M))`.
pub fn log_squared_constant() -> f64 {
    let m = 1_000_000usize;
    let f = |x: f64| 1.0 / (x * (x + 1.0).ln().powi(2));
    let head: f64 = (1..=m).rev().map(|i| f(i as f64)).sum();
    let tail = 1.0 / ((m as f64) + 1.0).ln() - f(m as f64) / 2.0;
    2.0 / (head + tail)
}

/// `κ_p = (2π)^{1−p}/(2−p)`.
pub fn kappa(p: f64) -> Result<f64> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::OutOfRange(format!("exponent {p} outside [1, 2)")));
    }
    Ok(std::f64::consts::TAU.powf(1.0 - p) / (2.0 - p))
}

/// Capped radii `min(eps, law(i))`, `i = 1..=n`.
pub fn radii(law: RadiusLaw, eps: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| law.radius(i).min(eps)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DipoleSequence<T> {
    pub p: f64,
    pub eps: f64,
    pub law: RadiusLaw,
    pub radii: Vec<f64>,
    /// Centers of the disjoint balls `Bᵢ` of radius `aᵢ`.
    pub centers: Vec<Point<T>>,
    /// Segments `xᵢ⁻ → xᵢ⁺`, `xᵢ^± = centerᵢ ± (aᵢ/2, 0)`.
    pub current: PolylineCurrent<T>,
}

impl<T: Real> DipoleSequence<T> {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn endpoints(&self, i: usize) -> (Point<T>, Point<T>) {
        let half = Point::new(T::lit(self.radii[i] / 2.0), T::zero());
        (self.centers[i] - half, self.centers[i] + half)
    }

    /// `Σ aᵢ`, which equals the current's mass.
    pub fn mass(&self) -> f64 {
        self.radii.iter().sum()
    }

    /// `+1` at every `xᵢ⁺` and `−1` at every `xᵢ⁻`: the boundary of the current.
    pub fn charges(&self) -> Result<ChargeSet<T>> {
        let mut out = Vec::with_capacity(2 * self.len());
        for i in 0..self.len() {
            let (a, b) = self.endpoints(i);
            out.push(Charge::new(b, 1));
            out.push(Charge::new(a, -1));
        }
        ChargeSet::new(out)
    }
}

/// Square `[lo, hi]²` inscribed in the domain.
fn inscribed_square<T: Real>(domain: &Domain<T>) -> (Point<T>, Point<T>) {
    match *domain {
        Domain::Disk { center, radius } => {
            let s = radius / T::SQRT_2();
            (center - Point::new(s, s), center + Point::new(s, s))
        }
        Domain::Rect { min, max } => (min, max),
    }
}

/// Shelf packing of disks with non-increasing radii into a box, left to right, bottom to top.
fn shelf_pack<T: Real>(radii: &[f64], lo: Point<T>, hi: Point<T>) -> Result<Vec<Point<T>>> {
    let (x0, y0, x1, y1) = (lo.x.as_f64(), lo.y.as_f64(), hi.x.as_f64(), hi.y.as_f64());
    let mut out = Vec::with_capacity(radii.len());
    let (mut x, mut y, mut row) = (x0, y0, 0.0f64);
    for (i, &a) in radii.iter().enumerate() {
        if x + 2.0 * a > x1 {
            y += row;
            x = x0;
            row = 0.0;
        }
        if row == 0.0 {
            row = 2.0 * a;
        }
        if x + 2.0 * a > x1 || y + 2.0 * a > y1 {
            return Err(Error::Geometry(format!("domain too small to pack dipole {} of radius {a}", i + 1)));
        }
        out.push(Point::new(T::lit(x + a), T::lit(y + a)));
        x += 2.0 * a;
    }
    Ok(out)
}

/// `N` disjoint dipoles with radii `min(eps, aᵢ)` packed into the square inscribed in `domain`.
pub fn build_sequence<T: Real>(p: f64, eps: f64, n: usize, domain: &Domain<T>) -> Result<DipoleSequence<T>> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::OutOfRange(format!("exponent {p} outside (1, 2)")));
    }
    if n == 0 || !(eps > 0.0) {
        return Err(Error::Precondition("need N ≥ 1 and eps > 0".into()));
    }
    let law = RadiusLaw::for_exponent(p);
    let radii = radii(law, eps, n);
    let (lo, hi) = inscribed_square(domain);
    let centers = shelf_pack(&radii, lo, hi)?;
    let pieces = centers
        .iter()
        .zip(&radii)
        .map(|(&c, &a)| {
            let half = Point::new(T::lit(a / 2.0), T::zero());
            Piece::open(vec![c - half, c + half], 1)
        })
        .collect();
    Ok(DipoleSequence { p, eps, law, radii, centers, current: PolylineCurrent { pieces } })
}

/// `Σᵢ 2 κ_p (aᵢ/2)^{2−p}` for radii `aᵢ`, `p ∈ [1, 2)`.
pub fn bound_for_radii(radii: &[f64], p: f64) -> Result<f64> {
    let k = kappa(p)?;
    Ok(radii.iter().map(|&a| 2.0 * k * (a / 2.0).powf(2.0 - p)).sum())
}

/// Lower bound for `‖V‖_p^p` over fields with `div V = ∂I`, from the endpoint balls.
pub fn min_norm_lower_bound<T: Real>(seq: &DipoleSequence<T>) -> Result<f64> {
    if seq.p >= 2.0 {
        return Err(Error::OutOfRange(format!("exponent {} ≥ 2: the endpoint estimate degenerates", seq.p)));
    }
    bound_for_radii(&seq.radii, seq.p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub threshold: f64,
    /// Smallest `N` with bound `> threshold`, if reached within the search limit.
    pub n: Option<usize>,
    pub mass: f64,
    pub bound: f64,
}

/// For each threshold, the smallest `N ≤ max_n` whose lower bound exceeds it.
///
/// Uses the radius law directly; packing does not change the bound.
pub fn divergence_certificate(p: f64, eps: f64, thresholds: &[f64], max_n: usize) -> Result<Vec<CertificateRow>> {
    let k = kappa(p)?;
    if p <= 1.0 {
        return Err(Error::OutOfRange(format!("exponent {p} must exceed 1")));
    }
    let law = RadiusLaw::for_exponent(p);
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let mut rows: Vec<CertificateRow> =
        thresholds.iter().map(|&t| CertificateRow { threshold: t, n: None, mass: f64::NAN, bound: f64::NAN }).collect();
    let (mut mass, mut bound) = (0.0f64, 0.0f64);
    let mut next = 0;
    for i in 1..=max_n {
        if next == order.len() {
            break;
        }
        let a = law.radius(i).min(eps);
        mass += a;
        bound += 2.0 * k * (a / 2.0).powf(2.0 - p);
        while next < order.len() && bound > thresholds[order[next]] {
            rows[order[next]] = CertificateRow { threshold: thresholds[order[next]], n: Some(i), mass, bound };
            next += 1;
        }
    }
    for &o in &order[next..] {
        rows[o].mass = mass;
        rows[o].bound = bound;
    }
    Ok(rows)
}

/// The same endpoint sum at `p = 1`, `Σ_{i≤N} aᵢ`, for each `N` in `ns`.
pub fn p1_partial_sums(law: RadiusLaw, eps: f64, ns: &[usize]) -> Vec<(usize, f64)> {
    let max = ns.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(ns.len());
    let mut acc = 0.0;
    let mut sums = Vec::with_capacity(max + 1);
    sums.push(0.0);
    for i in 1..=max {
        acc += 2.0 * (law.radius(i).min(eps) / 2.0);
        sums.push(acc);
    }
    for &n in ns {
        out.push((n, sums[n]));
    }
    out
}

/// CSV with columns `N,mass,bound`; unreached thresholds are skipped.
pub fn certificate_csv(rows: &[CertificateRow]) -> String {
    let mut s = String::from("N,mass,bound\n");
    for r in rows {
        if let Some(n) = r.n {
            let _ = writeln!(s, "{n},{},{}", r.mass, r.bound);
        }
    }
    s
}
