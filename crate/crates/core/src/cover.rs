//! Shifted ball covers with controlled boundary flux, and the good/bad classification.
//!
//! A cover at scale `r` is a maximal `3r/4`-separated set in the `r`-enlarged domain, translated
//! by a shift `z ∈ B_r`, with radii `rᵢ ∈ [0.78 r, r]`. Separation `3r/4` keeps the balls of
//! radius `(3/8) rᵢ` disjoint, and the covering radius of the set (at most `3r/4` plus the
//! candidate-grid spacing) stays below every `rᵢ`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{check_circle, circle_flux, circle_samples};
use crate::geometry::{Circle, Domain, Point};
use crate::grid::VectorField2D;
use crate::norms::{lp_norm, Exponent};
use crate::scalar::Real;

/// Smallest admissible radius as a fraction of `r`.
pub const MIN_RADIUS_FRACTION: f64 = 0.78;
/// Separation of the centers as a fraction of `r`.
pub const SEPARATION_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallLabel {
    Unclassified,
    /// Flux quantum 0.
    Good,
    /// Nonzero flux quantum.
    Bad,
    /// The bounding circle leaves the mask; no quantum is defined.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BallFlux<T> {
    /// `∮ |V·n|^p` with `V` extended by zero.
    pub lp_flux: T,
    pub quantum: Option<i64>,
    pub residual: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BallCover<T> {
    pub r: T,
    pub p: T,
    pub centers: Vec<Point<T>>,
    pub radii: Vec<T>,
    pub shift: Point<T>,
    pub labels: Vec<BallLabel>,
    pub flux_stats: Vec<BallFlux<T>>,
    /// `Σᵢ ∮_{∂Bᵢ} |V·n|^p` for the selected shift.
    pub sum: T,
    /// Mean of the sums over all sampled shifts.
    pub mean_sum: T,
    /// `Ĉ = sum·r / ‖V‖_p^p`.
    pub fitted_constant: T,
}

impl<T: Real> BallCover<T> {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn ball(&self, k: usize) -> Circle<T> {
        Circle::new(self.centers[k], self.radii[k])
    }

    pub fn count(&self, label: BallLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Number of balls containing `p`.
    pub fn multiplicity_at(&self, p: Point<T>) -> usize {
        (0..self.len()).filter(|&k| self.ball(k).contains(p)).count()
    }
}

struct Buckets<T> {
    cell: T,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl<T: Real> Buckets<T> {
    fn new(cell: T) -> Self {
        Buckets { cell, map: HashMap::new() }
    }

    fn key(&self, p: Point<T>) -> (i64, i64) {
        ((p.x / self.cell).floor().as_f64() as i64, (p.y / self.cell).floor().as_f64() as i64)
    }

    fn insert(&mut self, p: Point<T>, id: usize) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(id);
    }

    /// Ids in the 3×3 block of buckets around `p`.
    fn near(&self, p: Point<T>) -> impl Iterator<Item = usize> + '_ {
        let (a, b) = self.key(p);
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| self.map.get(&(a + dx, b + dy)).into_iter().flatten().copied())
        })
    }
}

/// Greedy `sep`-separated set, maximal over a shuffled candidate grid of spacing `sep/32`
/// covering the domain enlarged by `enlarge`.
fn separated_set<T: Real>(domain: &Domain<T>, sep: T, enlarge: T, seed: u64) -> Vec<Point<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = sep / T::lit(32.0);
    let (lo, hi) = domain.bounds();
    let lo = lo - Point::new(enlarge, enlarge);
    let hi = hi + Point::new(enlarge, enlarge);
    let nx = ((hi.x - lo.x) / delta).ceil().as_f64() as usize + 1;
    let ny = ((hi.y - lo.y) / delta).ceil().as_f64() as usize + 1;
    let jitter = Point::new(T::lit(rng.gen::<f64>()), T::lit(rng.gen::<f64>())) * delta;
    let mut candidates: Vec<Point<T>> = (0..nx * ny)
        .map(|k| lo + jitter + Point::new(T::lit((k % nx) as f64), T::lit((k / nx) as f64)) * delta)
        .filter(|&p| domain.signed_distance(p) <= enlarge)
        .collect();
    candidates.shuffle(&mut rng);
    let mut buckets = Buckets::new(sep);
    let mut centers: Vec<Point<T>> = Vec::new();
    let sep2 = sep * sep;
    for p in candidates {
        if buckets.near(p).all(|k| centers[k].dist(p).powi(2) >= sep2) {
            buckets.insert(p, centers.len());
            centers.push(p);
        }
    }
    centers
}

/// Maximal `r`-separated set in the `r`-enlarged domain (up to the `r/32` candidate grid).
pub fn maximal_separated_set<T: Real>(domain: &Domain<T>, r: T, seed: u64) -> Result<Vec<Point<T>>> {
    if !(r > T::zero()) || r >= domain.diameter() + r + r {
        return Err(Error::Precondition(format!("separation {r} out of range for this domain")));
    }
    Ok(separated_set(domain, r, r, seed))
}

/// Draws radii in `[0.78 r, r]` keeping every circle at least `margin` away from each
/// `(point, margin)` in `avoid`.
pub(crate) fn draw_radii<T: Real>(
    centers: &[Point<T>],
    avoid: &[(Point<T>, T)],
    r: T,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<T>> {
    let lo = r * T::lit(MIN_RADIUS_FRACTION);
    let widest = avoid.iter().map(|a| a.1).fold(T::zero(), T::max);
    let mut buckets = Buckets::new(r + widest);
    for (k, a) in avoid.iter().enumerate() {
        buckets.insert(a.0, k);
    }
    let mut radii = Vec::with_capacity(centers.len());
    for &c in centers {
        let near: Vec<(T, T)> = buckets.near(c).map(|k| (avoid[k].0.dist(c), avoid[k].1)).collect();
        let mut found = None;
        for _ in 0..256 {
            let rho = lo + (r - lo) * T::lit(rng.gen::<f64>());
            if near.iter().all(|&(d, m)| (d - rho).abs() >= m) {
                found = Some(rho);
                break;
            }
        }
        match found {
            Some(rho) => radii.push(rho),
            None => {
                return Err(Error::Geometry(format!(
                    "no admissible radius for the ball at ({}, {}); too many singular points nearby",
                    c.x, c.y
                )))
            }
        }
    }
    Ok(radii)
}

/// `∮ |V·n|^p` with `V` extended by zero outside the mask.
fn circle_lp_flux<T: Real>(v: &VectorField2D<T>, c: &Circle<T>, p: T) -> Result<T> {
    let n = circle_samples(c.radius, v.grid.h * T::lit(0.5), 64);
    let step = T::two_pi() / T::lit(n as f64);
    let mut acc = T::zero();
    for k in 0..n {
        let normal = Point::polar(step * T::lit(k as f64));
        let q = c.center + normal * c.radius;
        let w = v.sample_or_zero(q).ok_or_else(|| {
            Error::Geometry(format!("circle at ({}, {}) touches a singular node", c.center.x, c.center.y))
        })?;
        acc = acc + w.dot(normal).abs().powf(p);
    }
    Ok(acc * step * c.radius)
}

/// Options for [`shifted_cover`].
#[derive(Debug, Clone)]
pub struct CoverOptions<T> {
    pub nshifts: usize,
    pub seed: u64,
    /// Extra points circles must avoid (current vertices, known singularities).
    pub avoid: Vec<Point<T>>,
}

impl<T> Default for CoverOptions<T> {
    fn default() -> Self {
        CoverOptions { nshifts: 64, seed: 0, avoid: Vec::new() }
    }
}

/// Translates a separated set by the best of `nshifts` random shifts in `B_r`.
///
/// Circles keep `2h` away from the extra avoid points and `1.5h` away from singular nodes.
/// Shifts for which some ball has no admissible radius are discarded.
pub fn shifted_cover<T: Real>(
    v: &VectorField2D<T>,
    r: T,
    p: Exponent<T>,
    options: &CoverOptions<T>,
) -> Result<BallCover<T>> {
    let grid = &v.grid;
    let h = grid.h;
    if r < h * T::lit(8.0) {
        return Err(Error::Precondition(format!("cover radius {r} below 8h = {}", h * T::lit(8.0))));
    }
    if options.nshifts == 0 {
        return Err(Error::Precondition("nshifts must be positive".into()));
    }
    let domain = grid.domain();
    let sep = r * T::lit(SEPARATION_FRACTION);
    let base = separated_set(&domain, sep, r, options.seed);
    // singular nodes only need to stay out of the bilinear stencil
    let node_margin = h * T::lit(1.5);
    let avoid: Vec<(Point<T>, T)> = v
        .singular_points()
        .into_iter()
        .map(|q| (q, node_margin))
        .chain(options.avoid.iter().map(|&q| (q, h + h)))
        .collect();

    let trials: Vec<Result<(Point<T>, Vec<Point<T>>, Vec<T>, Vec<T>)>> = (0..options.nshifts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(s as u64 + 1);
            let shift = if s == 0 {
                Point::zero()
            } else {
                let (rho, t): (f64, f64) = (rng.gen(), rng.gen());
                Point::polar(T::lit(t * std::f64::consts::TAU)) * (r * T::lit(rho.sqrt()))
            };
            let centers: Vec<Point<T>> = base.iter().map(|&c| c + shift).collect();
            let radii = draw_radii(&centers, &avoid, r, &mut rng)?;
            let fluxes = centers
                .iter()
                .zip(&radii)
                .map(|(&c, &rho)| circle_lp_flux(v, &Circle::new(c, rho), p.get()))
                .collect::<Result<Vec<T>>>()?;
            Ok((shift, centers, radii, fluxes))
        })
        .collect();
    let mut best: Option<(Point<T>, Vec<Point<T>>, Vec<T>, Vec<T>)> = None;
    let mut total = T::zero();
    let mut count = 0usize;
    let mut first_err = None;
    for t in trials {
        match t {
            Ok(t) => {
                let s: T = t.3.iter().copied().sum();
                total = total + s;
                count += 1;
                if best.as_ref().is_none_or(|b| s < b.3.iter().copied().sum()) {
                    best = Some(t);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (shift, centers, radii, fluxes) = match best {
        Some(b) => b,
        None => return Err(first_err.unwrap_or_else(|| Error::Internal("no shift evaluated".into()))),
    };
    let sum: T = fluxes.iter().copied().sum();
    let norm_p = lp_norm(v, p)?.powf(p.get());
    let fitted_constant = if norm_p > T::zero() { sum * r / norm_p } else { T::zero() };
    let n = centers.len();
    Ok(BallCover {
        r,
        p: p.get(),
        centers,
        radii,
        shift,
        labels: vec![BallLabel::Unclassified; n],
        flux_stats: fluxes.into_iter().map(|f| BallFlux { lp_flux: f, quantum: None, residual: None }).collect(),
        sum,
        mean_sum: total / T::lit(count as f64),
        fitted_constant,
    })
}

/// Default residual tolerance for flux quantization of sampled fields, `0.25` rad.
///
/// Bilinear sampling of a `1/ρ` field a few cells from its center is only accurate to a few
/// hundredths of a radian; quanta stay unambiguous up to `π`.
pub fn default_classify_tol<T: Real>() -> T {
    T::lit(0.25)
}

/// Labels each ball by the flux quantum through its circle.
pub fn classify_balls<T: Real>(v: &VectorField2D<T>, cover: &BallCover<T>, tol: T) -> Result<BallCover<T>> {
    let quad_tol = T::lit(1e-6).max(T::epsilon().sqrt());
    let results: Vec<Result<(BallLabel, Option<i64>, Option<T>)>> = (0..cover.len())
        .into_par_iter()
        .map(|k| {
            let c = cover.ball(k);
            let h = v.grid.h;
            let inside = v.grid.domain().signed_distance(c.center) + c.radius <= -(h + h);
            if !inside || check_circle(&v.grid, &c).is_err() {
                return Ok((BallLabel::Boundary, None, None));
            }
            let f = circle_flux(v, &c, quad_tol)?;
            if f.residual > tol {
                return Err(Error::NotQuantized(format!(
                    "flux {} through the ball at ({}, {}) radius {} is {} away from 2πℤ (tol {tol})",
                    f.value, c.center.x, c.center.y, c.radius, f.residual
                )));
            }
            let label = if f.quantum == 0 { BallLabel::Good } else { BallLabel::Bad };
            Ok((label, Some(f.quantum), Some(f.residual)))
        })
        .collect();
    let mut out = cover.clone();
    for (k, r) in results.into_iter().enumerate() {
        let (label, q, res) = r?;
        out.labels[k] = label;
        out.flux_stats[k].quantum = q;
        out.flux_stats[k].residual = res;
    }
    Ok(out)
}

/// Bad-ball counts per radius and the least-squares slope of `log count` against `log ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ScalingReport<T> {
    pub radii: Vec<T>,
    pub counts: Vec<usize>,
    /// `None` when some count is zero.
    pub slope: Option<T>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = T::lit(x.len() as f64);
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    (sxx > T::zero()).then(|| sxy / sxx)
}

fn check_radii<T: Real>(radii: &[T]) -> Result<()> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("radii must be strictly decreasing, at least two".into()));
    }
    Ok(())
}

fn report<T: Real>(radii: &[T], counts: Vec<usize>) -> ScalingReport<T> {
    let slope = if counts.iter().all(|&c| c > 0) {
        let lx: Vec<T> = radii.iter().map(|r| r.ln()).collect();
        let ly: Vec<T> = counts.iter().map(|&c| T::lit(c as f64).ln()).collect();
        fit_slope(&lx, &ly)
    } else {
        None
    };
    ScalingReport { radii: radii.to_vec(), counts, slope }
}

/// Runs [`shifted_cover`] and [`classify_balls`] on a fixed field at each radius.
pub fn bad_ball_scaling<T: Real>(
    v: &VectorField2D<T>,
    p: Exponent<T>,
    radii: &[T],
    options: &CoverOptions<T>,
    tol: T,
) -> Result<ScalingReport<T>> {
    bad_ball_scaling_family(|_| Ok(v.clone()), p, radii, options, tol)
}

/// As [`bad_ball_scaling`], with a separate field built for every radius.
pub fn bad_ball_scaling_family<T: Real>(
    field: impl Fn(T) -> Result<VectorField2D<T>>,
    p: Exponent<T>,
    radii: &[T],
    options: &CoverOptions<T>,
    tol: T,
) -> Result<ScalingReport<T>> {
    check_radii(radii)?;
    let mut counts = Vec::with_capacity(radii.len());
    for &eps in radii {
        let v = field(eps)?;
        let cover = shifted_cover(&v, eps, p, options)?;
        let cover = classify_balls(&v, &cover, tol)?;
        counts.push(cover.count(BallLabel::Bad));
    }
    Ok(report(radii, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::lifting::{green_field, Charge, ChargeSet};

    fn square() -> Domain<f64> {
        Domain::Rect { min: Point::new(0.0, 0.0), max: Point::new(1.0, 1.0) }
    }

    #[test]
    fn separated_set_counts_and_maximality() {
        let d = Domain::Disk { center: Point::zero(), radius: 1.0 };
        assert_eq!(separated_set(&d, 2.5, 0.0, 1).len(), 1);
        let s = maximal_separated_set(&square(), 0.25, 7).unwrap();
        assert!((16..=81).contains(&s.len()), "{}", s.len());
        for (a, pa) in s.iter().enumerate() {
            for pb in &s[..a] {
                assert!(pa.dist(*pb) >= 0.25 - 1e-12);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let q = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
            let near = s.iter().map(|c| c.dist(q)).fold(f64::INFINITY, f64::min);
            assert!(near < 0.25 * (1.0 + 1.0 / 32.0), "{near}");
        }
        assert_eq!(maximal_separated_set(&square(), 0.25, 7).unwrap(), s);
    }

    #[test]
    fn zero_field_cover_covers_and_packs() {
        let g = GridSpec::<f64>::unit_disk(128).unwrap();
        let v = VectorField2D::zeros(&g);
        let p = Exponent::new(1.5).unwrap();
        let opts = CoverOptions { nshifts: 8, seed: 3, avoid: vec![] };
        let c = shifted_cover(&v, 0.2, p, &opts).unwrap();
        assert_eq!(c.sum, 0.0);
        for k in (0..g.node_count()).filter(|&k| g.is_masked(k)) {
            let m = c.multiplicity_at(g.node_point(k));
            assert!((1..=37).contains(&m), "{m}");
        }
        for a in 0..c.len() {
            for b in 0..a {
                let d = c.centers[a].dist(c.centers[b]);
                assert!(d >= 0.375 * (c.radii[a] + c.radii[b]) - 1e-12);
            }
            assert!(c.radii[a] >= 0.78 * 0.2 && c.radii[a] <= 0.2);
        }
        let c = classify_balls(&v, &c, default_classify_tol()).unwrap();
        assert_eq!(c.count(BallLabel::Bad), 0);
        assert!(c.count(BallLabel::Good) > 0);
    }

    #[test]
    fn vortex_balls_are_bad_and_dipoles_cancel() {
        let g = GridSpec::<f64>::unit_disk(256).unwrap();
        let x0 = Point::new(0.05, -0.1);
        let charges = ChargeSet::new(vec![Charge::new(x0, 1)]).unwrap();
        let v = green_field(&charges, &g);
        let p = Exponent::new(1.5).unwrap();
        let opts = CoverOptions { nshifts: 16, seed: 11, avoid: vec![x0] };
        let c = classify_balls(&v, &shifted_cover(&v, 0.2, p, &opts).unwrap(), default_classify_tol()).unwrap();
        assert!(c.sum <= c.mean_sum);
        for k in 0..c.len() {
            let expect = if c.ball(k).contains(x0) { BallLabel::Bad } else { BallLabel::Good };
            if c.labels[k] != BallLabel::Boundary {
                assert_eq!(c.labels[k], expect, "ball {k}");
            }
            if c.labels[k] == BallLabel::Bad {
                assert_eq!(c.flux_stats[k].quantum, Some(1));
            }
        }
        assert!(c.count(BallLabel::Bad) >= 1);

        let pair = ChargeSet::new(vec![
            Charge::new(Point::new(-0.03, 0.0), 1),
            Charge::new(Point::new(0.03, 0.0), -1),
        ])
        .unwrap();
        let v = green_field(&pair, &g);
        let ball = Circle::new(Point::zero(), 0.3);
        assert_eq!(circle_flux(&v, &ball, 1e-6).unwrap().quantum, 0);
    }

    #[test]
    fn slope_fit() {
        let x: Vec<f64> = [0.2f64, 0.1, 0.05].iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = x.iter().map(|&l| 3.0 - 0.5 * l).collect();
        assert!((fit_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        let r = report(&[0.2, 0.1], vec![0, 0]);
        assert_eq!(r.slope, None);
        assert!(check_radii(&[0.1, 0.2]).is_err());
    }
}
