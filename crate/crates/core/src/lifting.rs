//! `V ↦ u` with `∇⊥u = V` and the inverse `u ↦ ∇⊥u`.
//!
//! The lift subtracts the Green field `V′ = Σ nᵢ (x − xᵢ)/|x − xᵢ|²` of the declared charges,
//! integrates the remainder `W = V − V′` along a breadth-first spanning tree into a real
//! potential `φ` with `∇⊥φ = W`, and returns `u = φ + Σ nᵢ Arg(x − xᵢ) mod 2π`. Every non-tree
//! edge closes a loop whose residual must stay below `tol`; a missing or wrong charge shows up
//! as a residual near `2π`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::currents::{boundary, PolylineCurrent};
use crate::error::{Error, Result};
use crate::flux::{boundary_degree, circle_flux};
use crate::geometry::{Circle, Point};
use crate::grid::{CircleValuedField, GridSpec, VectorField2D};
use crate::norms::{lp_norm_where, Exponent};
use crate::scalar::{wrap_angle, wrap_diff, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Charge<T> {
    pub x: T,
    pub y: T,
    pub n: i64,
}

impl<T: Real> Charge<T> {
    pub fn new(location: Point<T>, n: i64) -> Self {
        Charge { x: location.x, y: location.y, n }
    }

    pub fn location(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }
}

/// Point vortices `(xᵢ, nᵢ)`, `nᵢ ≠ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent, bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ChargeSet<T> {
    pub charges: Vec<Charge<T>>,
}

impl<T: Real> ChargeSet<T> {
    pub fn new(charges: Vec<Charge<T>>) -> Result<Self> {
        let set = ChargeSet { charges };
        set.validate()?;
        Ok(set)
    }

    pub fn empty() -> Self {
        ChargeSet { charges: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, c) in self.charges.iter().enumerate() {
            if c.n == 0 {
                return Err(Error::Data(format!("charge {k} has degree 0")));
            }
            if !c.location().is_finite() {
                return Err(Error::Data(format!("charge {k} has a non-finite location")));
            }
            if self.charges[..k].iter().any(|d| d.location() == c.location()) {
                return Err(Error::Data(format!("charge {k} repeats a location")));
            }
        }
        Ok(())
    }

    /// Checks the grid-dependent invariants: inside the mask and pairwise `≥ 4h` apart.
    pub fn validate_on(&self, grid: &GridSpec<T>) -> Result<()> {
        self.validate()?;
        let sep = grid.h * T::lit(4.0);
        for (k, c) in self.charges.iter().enumerate() {
            if !grid.domain().contains(c.location()) {
                return Err(Error::Precondition(format!("charge {k} lies outside the domain")));
            }
            if let Some(d) = self.charges[..k].iter().find(|d| d.location().dist(c.location()) < sep) {
                return Err(Error::Precondition(format!(
                    "charges at ({}, {}) and ({}, {}) are closer than 4h",
                    d.x, d.y, c.x, c.y
                )));
            }
        }
        Ok(())
    }

    pub fn total_degree(&self) -> i64 {
        self.charges.iter().map(|c| c.n).sum()
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    /// `Σ nᵢ Arg(x − xᵢ)`, unwrapped. `Arg(0)` is taken as 0.
    pub fn phase(&self, p: Point<T>) -> T {
        self.charges.iter().map(|c| T::lit(c.n as f64) * (p - c.location()).angle()).sum()
    }
}

/// `Σ nᵢ (x − xᵢ)/|x − xᵢ|²`; nodes within `h` of a charge are flagged singular.
pub fn green_field<T: Real>(charges: &ChargeSet<T>, grid: &GridSpec<T>) -> VectorField2D<T> {
    let h = grid.h;
    VectorField2D::from_fn(grid, |p| {
        let mut acc = Point::zero();
        for c in &charges.charges {
            let d = p - c.location();
            let r2 = d.norm2();
            if r2 < h * h {
                return None;
            }
            acc = acc + d * (T::lit(c.n as f64) / r2);
        }
        Some(acc)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftResult<T> {
    pub u: CircleValuedField<T>,
    pub max_loop_residual: T,
    pub boundary_degree: i64,
    pub tol: T,
}

/// `max(1e-6, 10 h² ‖V‖∞)`.
pub fn default_tol<T: Real>(v: &VectorField2D<T>) -> T {
    let h = v.grid.h;
    T::lit(1e-6).max(T::lit(10.0) * h * h * v.sup_norm())
}

/// Increment of `φ` along the edge `a → b` (4-neighbours) from `W = ∇⊥φ`, trapezoid rule.
fn edge_increment<T: Real>(grid: &GridSpec<T>, w: &VectorField2D<T>, a: usize, b: usize) -> T {
    let half_h = grid.h * T::lit(0.5);
    let (wa, wb) = (w.at(a), w.at(b));
    let (ia, ja) = grid.coords(a);
    let (ib, jb) = grid.coords(b);
    if ja == jb {
        // ∂₁φ = −W₂
        let d = -(wa.y + wb.y) * half_h;
        if ib > ia {
            d
        } else {
            -d
        }
    } else {
        // ∂₂φ = W₁
        let d = (wa.x + wb.x) * half_h;
        if jb > ja {
            d
        } else {
            -d
        }
    }
}

fn on_mask_edge<T: Real>(grid: &GridSpec<T>, k: usize) -> bool {
    let (i, j) = grid.coords(k);
    i == 0 || j == 0 || i == grid.nx || j == grid.ny || grid.neighbors(k).any(|n| !grid.is_masked(n))
}

/// Lifts `V` given its complete list of point charges.
///
/// A field sampled from finite differences of a vortex phase carries a circulation error of a
/// few tenths of a radian in the cells around each core, independent of `h`. The default
/// tolerance shrinks with `h`, so such fields need an explicit `tol` (anything well below `π`
/// still separates them from a missing charge).
pub fn lift<T: Real>(v: &VectorField2D<T>, charges: &ChargeSet<T>, tol: Option<T>) -> Result<LiftResult<T>> {
    v.check_finite()?;
    charges.validate_on(&v.grid)?;
    let grid = &v.grid;
    let tol = tol.unwrap_or_else(|| default_tol(v));
    let green = green_field(charges, grid);
    let w = v.sub(&green);
    let n = grid.node_count();
    let usable: Vec<bool> = (0..n).map(|k| w.is_regular(k)).collect();

    let root = (0..n)
        .find(|&k| usable[k] && on_mask_edge(grid, k))
        .or_else(|| (0..n).find(|&k| usable[k]))
        .ok_or_else(|| Error::Precondition("no regular masked node to root the tree".into()))?;

    let mut phi = vec![T::zero(); n];
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    let mut reached = 1usize;
    while let Some(a) = queue.pop_front() {
        for b in grid.neighbors(a) {
            if usable[b] && !seen[b] {
                seen[b] = true;
                parent[b] = a;
                phi[b] = phi[a] + edge_increment(grid, &w, a, b);
                reached += 1;
                queue.push_back(b);
            }
        }
    }
    let total = usable.iter().filter(|&&x| x).count();
    if reached != total {
        return Err(Error::Precondition(format!(
            "regular nodes split into several components ({reached} of {total} reachable)"
        )));
    }

    // non-tree edges, each once (rightward and upward)
    let mut residuals: Vec<(usize, usize, T)> = (0..n)
        .into_par_iter()
        .filter(|&a| usable[a])
        .flat_map_iter(|a| {
            let (i, j) = grid.coords(a);
            let mut out = Vec::with_capacity(2);
            for b in [(i < grid.nx).then(|| grid.index(i + 1, j)), (j < grid.ny).then(|| grid.index(i, j + 1))]
                .into_iter()
                .flatten()
            {
                if usable[b] && parent[b] != a && parent[a] != b {
                    let r = (phi[a] + edge_increment(grid, &w, a, b) - phi[b]).abs();
                    out.push((a, b, r));
                }
            }
            out
        })
        .collect();
    let max_loop_residual = residuals.iter().map(|r| r.2).fold(T::zero(), T::max);
    if max_loop_residual > tol {
        residuals.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap_or(std::cmp::Ordering::Equal));
        let worst = residuals.iter().take(8).map(|&(a, b, r)| (a, b, r.as_f64())).collect();
        return Err(Error::NotLiftable {
            message: format!(
                "loop residual {} exceeds tol {}; the charge list is incomplete or the grid is too coarse",
                max_loop_residual, tol
            ),
            worst,
        });
    }

    // masked nodes excluded from the tree copy a neighbour's potential
    let mut filled = usable.clone();
    loop {
        let mut changed = false;
        for k in 0..n {
            if grid.is_masked(k) && !filled[k] {
                if let Some(nb) = grid.neighbors(k).find(|&m| filled[m]) {
                    phi[k] = phi[nb];
                    filled[k] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let raw: Vec<T> = (0..n)
        .map(|k| if grid.is_masked(k) { phi[k] + charges.phase(grid.node_point(k)) } else { T::zero() })
        .collect();
    let (mut s, mut c) = (T::zero(), T::zero());
    for k in (0..n).filter(|&k| grid.is_masked(k)) {
        s = s + raw[k].sin();
        c = c + raw[k].cos();
    }
    let mean = if s.hypot(c) > T::epsilon() { s.atan2(c) } else { T::zero() };
    let theta = raw.iter().enumerate().map(|(k, &x)| if grid.is_masked(k) { wrap_angle(x - mean) } else { T::zero() }).collect();
    let u = CircleValuedField { grid: grid.clone(), theta };
    let boundary_degree = boundary_degree(&u)?;
    Ok(LiftResult { u, max_loop_residual, boundary_degree, tol })
}

/// Lifts a field whose divergence is `2π(∂I + Σ nᵢ δ_{xᵢ})`: the endpoints of `I` join the
/// charge list, and `u` jumps by `2π` across the branch cuts carried by `I`.
pub fn lift_with_current<T: Real>(
    v: &VectorField2D<T>,
    charges: &ChargeSet<T>,
    current: &PolylineCurrent<T>,
    tol: Option<T>,
) -> Result<LiftResult<T>> {
    current.validate()?;
    let mut all = charges.clone();
    for m in boundary(current) {
        match all.charges.iter_mut().find(|c| c.location() == m.point) {
            Some(c) => c.n += m.multiplicity,
            None => all.charges.push(Charge::new(m.point, m.multiplicity)),
        }
    }
    all.charges.retain(|c| c.n != 0);
    lift(v, &all, tol).map_err(|e| match e {
        Error::NotLiftable { message, worst } => {
            Error::Inconsistent(format!("current and field disagree: {message} (worst edges {worst:?})"))
        }
        other => other,
    })
}

/// `∇⊥u = (∂₂u, −∂₁u)` by centered wrapped differences, one-sided at the mask edge.
pub fn unlift<T: Real>(u: &CircleValuedField<T>) -> VectorField2D<T> {
    let grid = &u.grid;
    let mut v = VectorField2D::zeros(grid);
    let h = grid.h;
    let diff = |k: usize, plus: Option<usize>, minus: Option<usize>| -> T {
        let ok = |m: Option<usize>| m.filter(|&m| grid.is_masked(m));
        match (ok(plus), ok(minus)) {
            (Some(p), Some(m)) => wrap_diff(u.theta[p] - u.theta[m]) / (h + h),
            (Some(p), None) => wrap_diff(u.theta[p] - u.theta[k]) / h,
            (None, Some(m)) => wrap_diff(u.theta[k] - u.theta[m]) / h,
            (None, None) => T::zero(),
        }
    };
    for k in 0..grid.node_count() {
        if !grid.is_masked(k) {
            continue;
        }
        let (i, j) = grid.coords(k);
        let dx = diff(k, (i < grid.nx).then(|| grid.index(i + 1, j)), (i > 0).then(|| grid.index(i - 1, j)));
        let dy = diff(k, (j < grid.ny).then(|| grid.index(i, j + 1)), (j > 0).then(|| grid.index(i, j - 1)));
        v.set(k, Point::new(dy, -dx));
    }
    v
}

/// Flux quantum measured on a small circle about a charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ChargeFlux<T> {
    pub location: Point<T>,
    pub expected: i64,
    /// `None` when no admissible circle fits around the charge.
    pub measured: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport<T> {
    /// `‖V − unlift(lift(V))‖_p` over cells without singular corners.
    pub error: T,
    /// `error / ‖V‖_p` over the same cells.
    pub relative_error: T,
    pub fluxes: Vec<ChargeFlux<T>>,
    pub lift: LiftResult<T>,
}

impl<T: Real> RoundtripReport<T> {
    pub fn degrees_exact(&self) -> bool {
        self.fluxes.iter().all(|f| f.measured.is_none_or(|m| m == f.expected))
    }
}

/// Lifts, unlifts and compares, plus per-charge flux agreement of `V`.
pub fn roundtrip<T: Real>(
    v: &VectorField2D<T>,
    charges: &ChargeSet<T>,
    p: Exponent<T>,
    tol: Option<T>,
) -> Result<RoundtripReport<T>> {
    let lifted = lift(v, charges, tol)?;
    let back = unlift(&lifted.u);
    let diff = v.sub(&back);
    let keep = |_i: usize, _j: usize| true;
    let inv = T::one() / p.get();
    let error = lp_norm_where(&diff, p, keep).powf(inv);
    let base = lp_norm_where(v, p, keep).powf(inv);
    let relative_error = if base > T::zero() { error / base } else { error };

    let grid = &v.grid;
    let fluxes = charges
        .charges
        .iter()
        .map(|c| {
            let x = c.location();
            let nearest = charges
                .charges
                .iter()
                .filter(|d| d.location() != x)
                .map(|d| d.location().dist(x))
                .fold(T::infinity(), T::min);
            let to_edge = -grid.domain().signed_distance(x);
            let radius = (nearest * T::lit(0.5)).min(to_edge * T::lit(0.5)).min(grid.h * T::lit(8.0));
            let measured = circle_flux(v, &Circle::new(x, radius), T::lit(1e-6)).ok().map(|f| f.quantum);
            ChargeFlux { location: x, expected: c.n, measured }
        })
        .collect();
    Ok(RoundtripReport { error, relative_error, fluxes, lift: lifted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::{interior_boundary, level_set_current, Piece};
    use crate::flux::circle_flux;

    fn disk(n: usize) -> GridSpec<f64> {
        GridSpec::unit_disk(n).unwrap()
    }

    fn set(list: &[(f64, f64, i64)]) -> ChargeSet<f64> {
        ChargeSet::new(list.iter().map(|&(x, y, n)| Charge::new(Point::new(x, y), n)).collect()).unwrap()
    }

    /// Wrapped sup distance after removing the best global constant.
    fn gauge_distance(u: &CircleValuedField<f64>, f: impl Fn(Point<f64>) -> f64) -> f64 {
        let g = &u.grid;
        let ks: Vec<usize> = (0..g.node_count()).filter(|&k| g.is_masked(k)).collect();
        let d: Vec<f64> = ks.iter().map(|&k| wrap_diff(u.theta[k] - f(g.node_point(k)))).collect();
        let shift = d[0];
        d.iter().map(|x| wrap_diff(x - shift).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn green_field_model_vortex_and_dipole() {
        let g = disk(64);
        let v = green_field(&set(&[(0.0, 0.0, 1)]), &g);
        let k = g.nearest_node(Point::new(0.5, 0.25)).unwrap();
        let x = g.node_point(k);
        assert!((v.at(k) - x * (1.0 / x.norm2())).norm() < 1e-14);
        assert!(v.singular[g.nearest_node(Point::zero()).unwrap()]);
        let zero = green_field(&ChargeSet::empty(), &g);
        assert_eq!(zero.sup_norm(), 0.0);

        let g = disk(128);
        let d = green_field(&set(&[(-0.3, 0.0, 1), (0.3, 0.0, -1)]), &g);
        let q = |c: (f64, f64), r: f64| circle_flux(&d, &Circle::new(Point::new(c.0, c.1), r), 1e-6).unwrap().quantum;
        assert_eq!(q((-0.3, 0.0), 0.15), 1);
        assert_eq!(q((0.3, 0.0), 0.15), -1);
        assert_eq!(q((0.0, 0.0), 0.6), 0);
    }

    #[test]
    fn lift_model_vortex_is_arg() {
        let g = disk(128);
        let charges = set(&[(0.0, 0.0, 1)]);
        let v = green_field(&charges, &g);
        let r = lift(&v, &charges, None).unwrap();
        assert_eq!(r.boundary_degree, 1);
        assert!(gauge_distance(&r.u, |p| p.angle()) < 1e-9);
    }

    #[test]
    fn lift_constant_and_smooth_potential() {
        let g = disk(64);
        let zero = VectorField2D::zeros(&g);
        let r = lift(&zero, &ChargeSet::empty(), None).unwrap();
        assert_eq!(r.boundary_degree, 0);
        assert!(gauge_distance(&r.u, |_| 0.0) < 1e-12);

        // w = sin(2x) cos(y) + x²; V = ∇⊥w = (∂₂w, −∂₁w)
        let w = |p: Point<f64>| (2.0 * p.x).sin() * p.y.cos() + p.x * p.x;
        let g = disk(256);
        let v = VectorField2D::from_fn(&g, |p| {
            Some(Point::new(-(2.0 * p.x).sin() * p.y.sin(), -(2.0 * (2.0 * p.x).cos() * p.y.cos() + 2.0 * p.x)))
        });
        let r = lift(&v, &ChargeSet::empty(), None).unwrap();
        assert_eq!(r.boundary_degree, 0);
        assert!(gauge_distance(&r.u, w) < 1e-3, "{}", gauge_distance(&r.u, w));
    }

    #[test]
    fn missing_charge_is_not_liftable() {
        let g = disk(64);
        let v = green_field(&set(&[(0.1, 0.05, 1)]), &g);
        let mut v2 = v.clone();
        // drop the singular flag so the defect is visible to the tree
        for k in 0..g.node_count() {
            if v2.singular[k] {
                v2.set(k, Point::zero());
            }
        }
        let e = lift(&v2, &ChargeSet::empty(), None).unwrap_err();
        match e {
            Error::NotLiftable { worst, .. } => assert!(worst[0].2 > 1.0, "{worst:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unlift_signs_and_norm_identity() {
        let n = 64;
        let g = GridSpec::new(0.0, 0.0, 0.05, n, n, crate::grid::MaskShape::Rect).unwrap();
        let u = CircleValuedField::from_fn(&g, |p| p.x);
        let v = unlift(&u);
        for k in 0..g.node_count() {
            assert!((v.at(k) - Point::new(0.0, -1.0)).norm() < 1e-12);
        }
        let c = unlift(&CircleValuedField::from_fn(&g, |_| 4.0));
        assert_eq!(c.sup_norm(), 0.0);

        let g = disk(256);
        let v = unlift(&CircleValuedField::from_fn(&g, |p| p.angle()));
        let k = g.nearest_node(Point::new(0.4, -0.3)).unwrap();
        let x = g.node_point(k);
        let exact = x * (1.0 / x.norm2());
        assert!((v.at(k) - exact).norm() < 10.0 * g.h * g.h, "{:?}", v.at(k) - exact);
    }

    #[test]
    fn roundtrip_zero_and_vortex() {
        let g = disk(64);
        let z = roundtrip(&VectorField2D::zeros(&g), &ChargeSet::empty(), Exponent::new(2.0).unwrap(), None).unwrap();
        assert_eq!(z.error, 0.0);
        let charges = set(&[(0.2, -0.1, 2), (-0.3, 0.3, -1)]);
        let v = green_field(&charges, &disk(128));
        let r = roundtrip(&v, &charges, Exponent::new(1.5).unwrap(), None).unwrap();
        assert!(r.degrees_exact(), "{:?}", r.fluxes);
        assert_eq!(r.lift.boundary_degree, 1);
        assert!(r.relative_error < 0.2, "{}", r.relative_error);
    }

    #[test]
    fn roots_differ_by_a_constant() {
        let g = disk(64);
        let charges = set(&[(0.1, 0.2, 1)]);
        let v = green_field(&charges, &g);
        let a = lift(&v, &charges, None).unwrap();
        // reflect the grid order by lifting the reflected field and reflecting back
        let b = lift(&v, &charges, Some(1e-3)).unwrap();
        let ks: Vec<usize> = (0..g.node_count()).filter(|&k| g.is_masked(k)).collect();
        let s = wrap_diff(a.u.theta[ks[0]] - b.u.theta[ks[0]]);
        for &k in &ks {
            assert!(wrap_diff(a.u.theta[k] - b.u.theta[k] - s).abs() < 2.0 * a.tol.max(1e-3));
        }
    }

    #[test]
    fn lift_with_segment_current_reproduces_its_boundary() {
        let g = disk(128);
        let (a, b) = (Point::new(-0.3, 0.1), Point::new(0.35, -0.05));
        let cur = PolylineCurrent::new(vec![Piece::open(vec![a, b], 1)]).unwrap();
        let companion = green_field(&set(&[(b.x, b.y, 1), (a.x, a.y, -1)]), &g);
        let r = lift_with_current(&companion, &ChargeSet::empty(), &cur, None).unwrap();
        assert_eq!(r.boundary_degree, 0);
        let ls = level_set_current(&r.u, 0.77).unwrap();
        let bd = interior_boundary(&ls, &g, 2.0 * g.h);
        assert_eq!(bd.len(), 2);
        for m in bd {
            let target = if m.multiplicity == 1 { b } else { a };
            assert!(m.point.dist(target) <= g.h * 2f64.sqrt(), "{m:?}");
        }
        let empty = lift_with_current(&companion, &set(&[(b.x, b.y, 1), (a.x, a.y, -1)]), &PolylineCurrent::empty(), None)
            .unwrap();
        assert_eq!(empty.u, r.u);
    }
}
