//! Approximation by fields with finitely many point singularities.
//!
//! Every ball of a shifted cover is processed in order. The current field's trace on the ball's
//! circle is mollified and snapped to a flux in `2πℤ`; a ball with flux quantum 0 is refilled
//! with `V̄ + ∇⊥A'`, the harmonic extension matching the normal trace, and a ball with quantum
//! `q ≠ 0` with the radial extension `(R/ρ) v_m(θ) r̂`, which carries the charge `q` at the
//! center. Later balls overwrite earlier ones and see their output, so a vortex shared by
//! overlapping balls ends up as a single charge.

use num_complex::Complex;
use rand::SeedableRng;

use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cover::{classify_balls, default_classify_tol, draw_radii, shifted_cover, BallCover, BallLabel, CoverOptions};
use crate::error::{Error, Result};
use crate::flux::{check_circle, circle_samples};
use crate::geometry::{Circle, Point};
use crate::grid::{GridSpec, Sample, VectorField2D};
use crate::lifting::{Charge, ChargeSet};
use crate::norms::Exponent;
use crate::quad::gauss_legendre;
use crate::scalar::Real;

/// Normal and tangential components of a field on equispaced angles `θ_k = 2πk/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CircleTrace<T> {
    pub ball: Circle<T>,
    pub normal: Vec<T>,
    pub tangential: Vec<T>,
}

impl<T: Real> CircleTrace<T> {
    pub fn len(&self) -> usize {
        self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normal.is_empty()
    }

    pub fn theta(&self, k: usize) -> T {
        T::two_pi() * T::lit(k as f64) / T::lit(self.len() as f64)
    }

    /// Trapezoid value of `∮ V·n dH¹`.
    pub fn flux(&self) -> T {
        let n = T::lit(self.len() as f64);
        self.normal.iter().copied().sum::<T>() * T::two_pi() * self.ball.radius / n
    }

    /// Periodic linear interpolation of the normal component.
    pub fn normal_at(&self, theta: T) -> T {
        let n = self.len();
        let s = crate::scalar::wrap_angle(theta) / T::two_pi() * T::lit(n as f64);
        let k = s.floor();
        let f = s - k;
        let k = (k.as_f64() as usize) % n;
        self.normal[k] * (T::one() - f) + self.normal[(k + 1) % n] * f
    }

    /// `(∮ |a − b|^p dH¹)^{1/p}` between the normal components of two traces on one circle.
    pub fn normal_distance(&self, other: &Self, p: T) -> T {
        let w = T::two_pi() * self.ball.radius / T::lit(self.len() as f64);
        let s: T = self.normal.iter().zip(&other.normal).map(|(a, b)| (*a - *b).abs().powf(p) * w).sum();
        s.powf(T::one() / p)
    }
}

/// Bilinear samples of `V·n` and `V·τ` at `nsamples` equispaced angles.
pub fn trace_circle<T: Real>(v: &VectorField2D<T>, c: &Circle<T>, nsamples: usize) -> Result<CircleTrace<T>> {
    if nsamples < 64 || !nsamples.is_power_of_two() {
        return Err(Error::Precondition(format!("sample count {nsamples} must be a power of two ≥ 64")));
    }
    check_circle(&v.grid, c)?;
    let mut normal = Vec::with_capacity(nsamples);
    let mut tangential = Vec::with_capacity(nsamples);
    for k in 0..nsamples {
        let n = Point::polar(T::two_pi() * T::lit(k as f64) / T::lit(nsamples as f64));
        let q = c.center + n * c.radius;
        match v.try_sample(q) {
            Sample::Value(w) => {
                normal.push(w.dot(n));
                tangential.push(w.dot(n.rot_ccw()));
            }
            Sample::Singular => {
                return Err(Error::Geometry(format!("circle passes a singular node near ({}, {})", q.x, q.y)))
            }
            Sample::Outside => return Err(Error::Geometry(format!("circle leaves the mask near ({}, {})", q.x, q.y))),
        }
    }
    Ok(CircleTrace { ball: *c, normal, tangential })
}

/// Unit-mass discrete bump `exp(−1/(1 − (θ/width)²))` on the sample offsets.
fn bump_weights<T: Real>(n: usize, width: T) -> Vec<(isize, T)> {
    let step = T::two_pi() / T::lit(n as f64);
    let half = ((width / step).floor().as_f64() as isize).min(n as isize / 2 - 1);
    let mut w: Vec<(isize, T)> = (-half..=half)
        .map(|j| {
            let x = T::lit(j as f64) * step / width;
            let v = if x.abs() < T::one() { (-(T::one() / (T::one() - x * x))).exp() } else { T::zero() };
            (j, v)
        })
        .filter(|(_, v)| *v > T::zero())
        .collect();
    let total: T = w.iter().map(|x| x.1).sum();
    if total > T::zero() {
        w.iter_mut().for_each(|x| x.1 = x.1 / total);
    } else {
        w = vec![(0, T::one())];
    }
    w
}

/// Circular convolution with a unit-mass bump of angular half-width `width`, then a constant
/// shift of the normal component snapping the flux onto `2πℤ`.
///
/// Returns the mollified trace and the pre-snap residual.
pub fn mollify_trace<T: Real>(t: &CircleTrace<T>, width: T, tol: T) -> Result<(CircleTrace<T>, T)> {
    if !(width > T::zero() && width < T::FRAC_PI_4()) {
        return Err(Error::Precondition(format!("mollifier width {width} outside (0, π/4)")));
    }
    let n = t.len();
    let w = bump_weights(n, width);
    let conv = |src: &[T]| -> Vec<T> {
        (0..n)
            .map(|k| {
                w.iter()
                    .map(|&(j, wj)| src[(k as isize + j).rem_euclid(n as isize) as usize] * wj)
                    .sum()
            })
            .collect()
    };
    let mut out = CircleTrace { ball: t.ball, normal: conv(&t.normal), tangential: conv(&t.tangential) };
    let flux = out.flux();
    let q = (flux / T::two_pi()).round();
    let residual = (flux - q * T::two_pi()).abs();
    if residual > tol {
        return Err(Error::NotQuantized(format!(
            "trace flux {flux} is {residual} away from 2πℤ on the circle at ({}, {}) (tol {tol})",
            t.ball.center.x, t.ball.center.y
        )));
    }
    let shift = (q * T::two_pi() - flux) / (T::two_pi() * t.ball.radius);
    out.normal.iter_mut().for_each(|x| *x = *x + shift);
    Ok((out, residual))
}

/// Field values written into the nodes of one ball; `None` marks a singular node.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPatch<T> {
    pub nodes: Vec<usize>,
    pub values: Vec<Option<Point<T>>>,
}

fn ball_nodes<T: Real>(grid: &GridSpec<T>, c: &Circle<T>) -> Vec<usize> {
    let h = grid.h;
    let lo_i = ((c.center.x - c.radius - grid.x0) / h).floor().as_f64().max(0.0) as usize;
    let lo_j = ((c.center.y - c.radius - grid.y0) / h).floor().as_f64().max(0.0) as usize;
    let hi_i = (((c.center.x + c.radius - grid.x0) / h).ceil().as_f64().max(0.0) as usize).min(grid.nx);
    let hi_j = (((c.center.y + c.radius - grid.y0) / h).ceil().as_f64().max(0.0) as usize).min(grid.ny);
    let mut out = Vec::new();
    for j in lo_j..=hi_j {
        for i in lo_i..=hi_i {
            let k = grid.index(i, j);
            if grid.is_masked(k) && c.contains(grid.node_point(k)) {
                out.push(k);
            }
        }
    }
    out
}

/// `∇⊥A' + V̄` on a ball, with `A' = Re Σ_{k=1}^{K} 2 a_k z^k`, `z = (x − c)/R`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicExtension<T> {
    pub ball: Circle<T>,
    pub mean: Point<T>,
    /// `2 a_k` for `k = 1..=K`.
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> HarmonicExtension<T> {
    fn z(&self, p: Point<T>) -> Complex<T> {
        let d = p - self.ball.center;
        Complex::new(d.x / self.ball.radius, d.y / self.ball.radius)
    }

    /// `(F(z), F'(z))` by Horner.
    fn eval(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let zero = Complex::new(T::zero(), T::zero());
        let (mut f, mut df) = (zero, zero);
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            let kk = T::lit((k + 1) as f64);
            f = (f + *c) * z;
            df = df * z + *c * kk;
        }
        (f, df)
    }

    pub fn potential(&self, p: Point<T>) -> T {
        self.eval(self.z(p)).0.re
    }

    /// `(∂₁A', ∂₂A')`.
    pub fn gradient(&self, p: Point<T>) -> Point<T> {
        let (_, df) = self.eval(self.z(p));
        Point::new(df.re / self.ball.radius, -df.im / self.ball.radius)
    }

    /// `V̄ + ∇⊥A'`.
    pub fn field(&self, p: Point<T>) -> Point<T> {
        self.mean + self.gradient(p).rot_cw()
    }

    /// `‖∇A'‖_{L²(B)}` by Gauss–Legendre in the radius and the trapezoid rule in the angle,
    /// both exact for the polynomial integrand.
    pub fn dirichlet_norm(&self) -> T {
        let kmax = self.coeffs.len().max(1);
        let rule = gauss_legendre(kmax + 1);
        let nt = (2 * kmax + 2).next_power_of_two().max(8);
        let mut acc = T::zero();
        for &(x, w) in &rule {
            let s = T::lit(0.5 * (x + 1.0));
            let ws = T::lit(0.5 * w);
            let mut ring = T::zero();
            for j in 0..nt {
                let th = T::two_pi() * T::lit(j as f64) / T::lit(nt as f64);
                let (_, df) = self.eval(Complex::from_polar(s, th));
                ring = ring + df.norm_sqr();
            }
            acc = acc + ws * s * ring * T::two_pi() / T::lit(nt as f64);
        }
        // |∇A'|² = |F'|²/R² and dA = R² s ds dθ
        acc.sqrt()
    }

    /// `‖∂_τ a‖_{L²(∂B)}` for the truncated boundary datum `a = A'|_{∂B}`, sampled at `n` angles.
    pub fn trace_derivative_norm(&self, n: usize) -> T {
        let r = self.ball.radius;
        let mut acc = T::zero();
        for j in 0..n {
            let th = T::two_pi() * T::lit(j as f64) / T::lit(n as f64);
            let z = Complex::from_polar(T::one(), th);
            let (_, df) = self.eval(z);
            // ∂_θ F(e^{iθ}) = i z F'(z); ∂_τ = ∂_θ / R
            let dth = (Complex::new(T::zero(), T::one()) * z * df).re;
            acc = acc + (dth / r).powi(2);
        }
        (acc * r * T::two_pi() / T::lit(n as f64)).sqrt()
    }

    pub fn patch(&self, grid: &GridSpec<T>) -> BallPatch<T> {
        let nodes = ball_nodes(grid, &self.ball);
        let values = nodes.iter().map(|&k| Some(self.field(grid.node_point(k)))).collect();
        BallPatch { nodes, values }
    }
}

/// Harmonic extension of a zero-flux trace: the normal component of `V̄ + ∇⊥A'` on the circle
/// equals the trace's, up to truncation at `modes` Fourier modes.
pub fn harmonic_extension<T: Real>(
    t: &CircleTrace<T>,
    mean: Point<T>,
    modes: Option<usize>,
    tol: T,
) -> Result<HarmonicExtension<T>> {
    let n = t.len();
    let r = t.ball.radius;
    let mut g: Vec<Complex<T>> =
        (0..n).map(|k| Complex::new(t.normal[k] - mean.dot(Point::polar(t.theta(k))), T::zero())).collect();
    let avg = g.iter().map(|c| c.re).sum::<T>() / T::lit(n as f64);
    if avg.abs() * T::two_pi() * r > tol {
        return Err(Error::Precondition(format!(
            "ball at ({}, {}) is not good: adjusted flux {}",
            t.ball.center.x,
            t.ball.center.y,
            avg * T::two_pi() * r
        )));
    }
    let kmax = modes.unwrap_or(n / 2 - 1).min(n / 2 - 1).max(1);
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    fft.process(&mut g);
    let scale = T::one() / T::lit(n as f64);
    // ∂_θ a = R g, so a_k = R g_k / (ik)
    let coeffs = (1..=kmax)
        .map(|k| {
            let gk = g[k] * scale;
            let ak = gk * r / Complex::new(T::zero(), T::lit(k as f64));
            ak * T::lit(2.0)
        })
        .collect();
    Ok(HarmonicExtension { ball: t.ball, mean, coeffs })
}

/// `(R/ρ) v_m(θ) r̂` on the ball; a node at the center itself is singular.
pub fn radial_extension<T: Real>(t: &CircleTrace<T>, grid: &GridSpec<T>) -> BallPatch<T> {
    let nodes = ball_nodes(grid, &t.ball);
    let values = nodes
        .iter()
        .map(|&k| {
            let d = grid.node_point(k) - t.ball.center;
            let rho = d.norm();
            if rho <= grid.h * T::lit(1e-9) {
                return None;
            }
            let rhat = d * (T::one() / rho);
            Some(rhat * (t.ball.radius / rho * t.normal_at(d.angle())))
        })
        .collect();
    BallPatch { nodes, values }
}

#[derive(Debug, Clone)]
pub struct ApproxOptions<T> {
    pub width: T,
    /// Fourier modes of the harmonic extension; `None` uses `nsamples/2 − 1`.
    pub modes: Option<usize>,
    pub nshifts: usize,
    pub seed: u64,
    pub tol: T,
}

impl<T: Real> Default for ApproxOptions<T> {
    fn default() -> Self {
        ApproxOptions {
            width: T::two_pi() / T::lit(64.0),
            modes: None,
            nshifts: 64,
            seed: 0,
            tol: default_classify_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ApproxReport<T> {
    pub r: T,
    pub p: T,
    /// `‖V − V_N‖_p` over the cells each ball wrote last.
    pub per_ball: Vec<T>,
    /// Label assigned when the ball was processed.
    pub labels: Vec<BallLabel>,
    pub total_error: T,
    /// `Σ per_ball ≥ total_error`.
    pub error_bound: T,
    /// Largest `‖v − v_m‖_{L^p(∂B)}` over processed balls.
    pub mollification_error: T,
    pub charges: ChargeSet<T>,
}

#[derive(Debug, Clone)]
pub struct Approximation<T> {
    pub field: VectorField2D<T>,
    pub charges: ChargeSet<T>,
    pub report: ApproxReport<T>,
    pub cover: BallCover<T>,
}

fn write_patch<T: Real>(v: &mut VectorField2D<T>, owner: &mut [Option<usize>], patch: &BallPatch<T>, ball: usize) {
    for (&k, val) in patch.nodes.iter().zip(&patch.values) {
        match val {
            Some(w) => v.set(k, *w),
            None => v.set_singular(k),
        }
        owner[k] = Some(ball);
    }
}

fn mean_over_ball<T: Real>(v: &VectorField2D<T>, c: &Circle<T>) -> Point<T> {
    let nodes: Vec<usize> = ball_nodes(&v.grid, c).into_iter().filter(|&k| v.is_regular(k)).collect();
    if nodes.is_empty() {
        return Point::zero();
    }
    nodes.iter().fold(Point::zero(), |acc, &k| acc + v.at(k)) * (T::one() / T::lit(nodes.len() as f64))
}

/// Admissible radius in `[0.78 r, r]` if one exists, otherwise the sampled radius with the
/// largest clearance.
fn pick_radius<T: Real>(center: Point<T>, avoid: &[(Point<T>, T)], r: T, rng: &mut ChaCha8Rng) -> T {
    if let Ok(v) = draw_radii(&[center], avoid, r, rng) {
        return v[0];
    }
    let lo = r * T::lit(crate::cover::MIN_RADIUS_FRACTION);
    let clearance = |rho: T| {
        avoid.iter().map(|&(q, m)| ((q.dist(center) - rho).abs() - m) / m).fold(T::infinity(), T::min)
    };
    (0..=64)
        .map(|i| lo + (r - lo) * T::lit(i as f64 / 64.0))
        .fold((lo, T::neg_infinity()), |best, rho| {
            let c = clearance(rho);
            if c > best.1 {
                (rho, c)
            } else {
                best
            }
        })
        .0
}

fn quantized_trace<T: Real>(
    v: &VectorField2D<T>,
    ball: &Circle<T>,
    options: &ApproxOptions<T>,
) -> Result<(CircleTrace<T>, CircleTrace<T>)> {
    let trace = trace_circle(v, ball, circle_samples(ball.radius, v.grid.h * T::lit(0.5), 64))?;
    let (moll, _) = mollify_trace(&trace, options.width, options.tol)?;
    Ok((trace, moll))
}

/// Sixteen radii spread over `[0.78 r, r]`, clearest first.
fn fallback_radii<T: Real>(center: Point<T>, avoid: &[(Point<T>, T)], r: T) -> Vec<T> {
    let lo = r * T::lit(crate::cover::MIN_RADIUS_FRACTION);
    let clearance = |rho: T| {
        avoid.iter().map(|&(q, m)| ((q.dist(center) - rho).abs() - m) / m).fold(T::infinity(), T::min)
    };
    let mut radii: Vec<(T, T)> = (0..16)
        .map(|i| {
            let rho = lo + (r - lo) * T::lit((i as f64 + 0.5) / 16.0);
            (clearance(rho), rho)
        })
        .collect();
    radii.sort_by(|a, b| b.0.as_f64().total_cmp(&a.0.as_f64()));
    radii.into_iter().map(|x| x.1).collect()
}

/// Builds `V_N` with finitely many singularities from a flux-quantized field.
pub fn approximate<T: Real>(
    v: &VectorField2D<T>,
    p: Exponent<T>,
    r: T,
    options: &ApproxOptions<T>,
) -> Result<Approximation<T>> {
    v.check_finite()?;
    let grid = v.grid.clone();
    let cover_opts = CoverOptions { nshifts: options.nshifts, seed: options.seed, avoid: Vec::new() };
    let mut cover = classify_balls(v, &shifted_cover(v, r, p, &cover_opts)?, options.tol)?;
    let mut current = v.clone();
    let mut owner: Vec<Option<usize>> = vec![None; grid.node_count()];
    let mut labels = cover.labels.clone();
    let mut bad: Vec<(usize, i64)> = Vec::new();
    let mut eps_m = T::zero();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed);
    let h = grid.h;

    for k in 0..cover.len() {
        if cover.labels[k] == BallLabel::Boundary {
            continue;
        }
        let mut ball = cover.ball(k);
        // keep clear of singular nodes and of the charges placed so far
        let avoid: Vec<(Point<T>, T)> = current
            .singular_points()
            .into_iter()
            .map(|q| (q, h * T::lit(1.5)))
            .chain(bad.iter().map(|&(b, _)| (cover.centers[b], h + h)))
            .collect();
        if avoid.iter().any(|&(q, m)| (q.dist(ball.center) - ball.radius).abs() < m) {
            let rho = pick_radius(ball.center, &avoid, r, &mut rng);
            ball = Circle::new(ball.center, rho);
            cover.radii[k] = rho;
        }
        // a radius whose trace misses 2πℤ is swapped for another one in the band
        let (trace, moll) = match quantized_trace(&current, &ball, options) {
            Err(Error::NotQuantized(msg)) => {
                let retry = fallback_radii(ball.center, &avoid, r)
                    .into_iter()
                    .find_map(|rho| quantized_trace(&current, &Circle::new(ball.center, rho), options).ok());
                match retry {
                    Some(t) => t,
                    None => return Err(Error::NotQuantized(msg)),
                }
            }
            other => other?,
        };
        ball = trace.ball;
        cover.radii[k] = ball.radius;
        eps_m = eps_m.max(trace.normal_distance(&moll, p.get()));
        let q = (moll.flux() / T::two_pi()).round().as_f64() as i64;
        let patch = if q == 0 {
            labels[k] = BallLabel::Good;
            let mean = mean_over_ball(&current, &ball);
            harmonic_extension(&moll, mean, options.modes, options.tol)?.patch(&grid)
        } else {
            labels[k] = BallLabel::Bad;
            bad.push((k, q));
            radial_extension(&moll, &grid)
        };
        write_patch(&mut current, &mut owner, &patch, k);
    }

    // a charge survives unless a later ball wrote over its center
    let mut charges = Vec::new();
    for &(k, q) in &bad {
        let c = cover.centers[k];
        let erased = ((k + 1)..cover.len())
            .any(|j| cover.labels[j] != BallLabel::Boundary && cover.ball(j).contains(c));
        if !erased {
            charges.push(Charge::new(c, q));
        }
    }
    let charges = ChargeSet::new(charges)?;

    let pe = p.get();
    let mut per_ball = vec![T::zero(); cover.len()];
    let mut total = T::zero();
    let h2 = h * h;
    for (i, j) in grid.active_cells() {
        let corners = grid.cell_corners(i, j);
        let (Some(a), Some(b)) = (v.cell_mid(i, j), current.cell_mid(i, j)) else { continue };
        let e = (a - b).norm().powf(pe) * h2;
        if let Some(o) = corners.iter().find_map(|&c| owner[c]) {
            per_ball[o] = per_ball[o] + e;
        }
        total = total + e;
    }
    let inv = T::one() / pe;
    per_ball.iter_mut().for_each(|x| *x = x.powf(inv));
    let total_error = total.powf(inv);
    let error_bound = per_ball.iter().copied().sum();
    let report = ApproxReport {
        r,
        p: pe,
        per_ball,
        labels,
        total_error,
        error_bound,
        mollification_error: eps_m,
        charges: charges.clone(),
    };
    Ok(Approximation { field: current, charges, report, cover })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::circle_flux;
    use crate::lifting::green_field;

    fn disk(n: usize) -> GridSpec<f64> {
        GridSpec::unit_disk(n).unwrap()
    }

    #[test]
    fn traces_of_simple_fields() {
        let g = disk(128);
        let c = Circle::new(Point::new(0.0, 0.0), 0.5);
        let vortex = green_field(&ChargeSet::new(vec![Charge::new(Point::zero(), 1)]).unwrap(), &g);
        let t = trace_circle(&vortex, &c, 128).unwrap();
        assert!(t.normal.iter().all(|&x| (x - 2.0).abs() < 1e-2));
        assert!(t.tangential.iter().all(|&x| x.abs() < 1e-2));
        let ones = VectorField2D::from_fn(&g, |_| Some(Point::new(1.0, 0.0)));
        let t = trace_circle(&ones, &c, 64).unwrap();
        for k in 0..64 {
            assert!((t.normal[k] - t.theta(k).cos()).abs() < 1e-12);
            assert!((t.tangential[k] + t.theta(k).sin()).abs() < 1e-12);
        }
        let z = trace_circle(&VectorField2D::zeros(&g), &c, 64).unwrap();
        assert!(z.normal.iter().chain(&z.tangential).all(|&x| x == 0.0));
        assert!(trace_circle(&ones, &c, 100).is_err());
    }

    #[test]
    fn mollification_keeps_mean_and_smooth_data() {
        let ball = Circle::new(Point::zero(), 0.5);
        let n = 256;
        let th = |k: usize| std::f64::consts::TAU * k as f64 / n as f64;
        let smooth = CircleTrace {
            ball,
            normal: (0..n).map(|k| 2.0 + th(k).cos()).collect(),
            tangential: vec![0.0; n],
        };
        let width = std::f64::consts::TAU / 64.0;
        let (m, res) = mollify_trace(&smooth, width, 1e-6).unwrap();
        assert!(res < 1e-12);
        let change = m.normal.iter().zip(&smooth.normal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(change <= width * width, "{change}");
        let noisy = CircleTrace {
            ball,
            normal: (0..n).map(|k| 2.0 + 0.3 * ((k * 7919) % 13) as f64 / 13.0 - 0.1385).collect(),
            tangential: vec![0.0; n],
        };
        let before = noisy.flux();
        let (m, res) = mollify_trace(&noisy, width, 0.1).unwrap();
        assert!((m.flux() - std::f64::consts::TAU).abs() < 1e-12);
        assert!(((before - m.flux()).abs() - res).abs() < 1e-12);
        assert!(mollify_trace(&noisy, 1.0, 0.1).is_err());
        assert!(matches!(mollify_trace(&noisy, width, 1e-9), Err(Error::NotQuantized(_))));
    }

    #[test]
    fn single_mode_harmonic_extension() {
        let ball = Circle::new(Point::zero(), 1.0);
        let n = 64;
        let t = CircleTrace {
            ball,
            normal: (0..n).map(|k| (std::f64::consts::TAU * k as f64 / n as f64).cos()).collect(),
            tangential: vec![0.0; n],
        };
        let e = harmonic_extension(&t, Point::zero(), None, 1e-9).unwrap();
        for q in [Point::new(0.3, -0.2), Point::new(-0.5, 0.5)] {
            assert!((e.potential(q) - q.y).abs() < 1e-12);
            assert!((e.field(q) - Point::new(1.0, 0.0)).norm() < 1e-12);
        }
        let zero = CircleTrace { ball, normal: vec![0.0; n], tangential: vec![0.0; n] };
        let z = harmonic_extension(&zero, Point::zero(), None, 1e-9).unwrap();
        assert_eq!(z.field(Point::new(0.1, 0.1)), Point::zero());
        let charged = CircleTrace { ball, normal: vec![1.0; n], tangential: vec![0.0; n] };
        assert!(matches!(harmonic_extension(&charged, Point::zero(), None, 1e-6), Err(Error::Precondition(_))));
    }

    #[test]
    fn energy_identity_on_the_unit_ball() {
        // on the unit circle ‖∇A'‖² = 2π Σ|k||a_k|² and ‖∂_τ a‖² = 2π Σ k²|a_k|²
        let ball = Circle::new(Point::zero(), 1.0);
        let n = 128;
        let t = CircleTrace {
            ball,
            normal: (0..n)
                .map(|k| {
                    let th = std::f64::consts::TAU * k as f64 / n as f64;
                    (2.0 * th).sin() + 0.5 * (3.0 * th).cos()
                })
                .collect(),
            tangential: vec![0.0; n],
        };
        let e = harmonic_extension(&t, Point::zero(), None, 1e-9).unwrap();
        // a = −cos 2θ / 2 + sin 3θ / 6, so |a_{±2}| = 1/4 and |a_{±3}| = 1/12
        let energy = (2.0 * std::f64::consts::TAU * (2.0 / 16.0 + 3.0 / 144.0)).sqrt();
        let trace = (2.0 * std::f64::consts::TAU * (4.0 / 16.0 + 9.0 / 144.0)).sqrt();
        assert!((e.dirichlet_norm() - energy).abs() < 1e-10, "{} vs {energy}", e.dirichlet_norm());
        assert!((e.trace_derivative_norm(n) - trace).abs() < 1e-10);
    }

    #[test]
    fn radial_extension_of_vortex_trace() {
        let g = disk(128);
        let ball = Circle::new(Point::new(0.1, 0.0), 0.4);
        let n = 128;
        let t = CircleTrace { ball, normal: vec![1.0 / 0.4; n], tangential: vec![0.0; n] };
        let patch = radial_extension(&t, &g);
        let mut v = VectorField2D::zeros(&g);
        let mut owner = vec![None; g.node_count()];
        write_patch(&mut v, &mut owner, &patch, 0);
        for (&k, val) in patch.nodes.iter().zip(&patch.values) {
            let d = g.node_point(k) - ball.center;
            match val {
                Some(w) => assert!((*w - d * (1.0 / d.norm2())).norm() < 1e-12),
                None => assert!(d.norm() < 1e-9),
            }
        }
        let f1 = circle_flux(&v, &Circle::new(ball.center, 0.2), 1e-8).unwrap();
        let f2 = circle_flux(&v, &Circle::new(ball.center, 0.35), 1e-8).unwrap();
        assert_eq!((f1.quantum, f2.quantum), (1, 1));
        assert!((f1.value - f2.value).abs() < 5e-2, "{} {}", f1.value, f2.value);
        let zero = CircleTrace { ball, normal: vec![0.0; n], tangential: vec![0.0; n] };
        assert!(radial_extension(&zero, &g).values.iter().flatten().all(|w| *w == Point::zero()));
    }

    #[test]
    fn approximate_model_vortex_and_smooth_field() {
        let g = disk(256);
        let charges = ChargeSet::new(vec![Charge::new(Point::new(0.02, -0.03), 1)]).unwrap();
        let v = green_field(&charges, &g);
        let opts = ApproxOptions { nshifts: 8, seed: 5, ..Default::default() };
        let a = approximate(&v, Exponent::new(1.5).unwrap(), 0.2, &opts).unwrap();
        assert_eq!(a.charges.len(), 1, "{:?}", a.charges);
        assert_eq!(a.charges.charges[0].n, 1);
        assert!(a.charges.charges[0].location().dist(Point::new(0.02, -0.03)) < 0.2);
        assert!(a.report.total_error <= a.report.error_bound);

        let swirl = VectorField2D::from_fn(&g, |q| Some(Point::new(-q.y, q.x) * (1.0 - q.norm2())));
        let a = approximate(&swirl, Exponent::new(2.0).unwrap(), 0.2, &opts).unwrap();
        assert!(a.charges.is_empty());
        let b = approximate(&swirl, Exponent::new(2.0).unwrap(), 0.1, &opts).unwrap();
        assert!(b.report.total_error < a.report.total_error * 1.1, "{} {}", a.report.total_error, b.report.total_error);
    }
}
