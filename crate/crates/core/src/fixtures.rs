//! Deterministic test fields shared by the tests, the acceptance suite and the CLI generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::{CircleValuedField, GridFunction, GridSpec, VectorField2D};
use crate::lifting::{green_field, unlift, Charge, ChargeSet};
use crate::scalar::Real;

/// `x/|x|²`, the field of a single `+1` charge at the origin.
pub fn model_vortex<T: Real>(grid: &GridSpec<T>) -> (VectorField2D<T>, ChargeSet<T>) {
    let charges = ChargeSet { charges: vec![Charge::new(Point::zero(), 1)] };
    (green_field(&charges, grid), charges)
}

/// `+1` at `(0.3, 0)` and `−1` at `(−0.3, 0)`.
pub fn dipole<T: Real>(grid: &GridSpec<T>) -> (VectorField2D<T>, ChargeSet<T>) {
    let charges = ChargeSet {
        charges: vec![
            Charge::new(Point::new(T::lit(0.3), T::zero()), 1),
            Charge::new(Point::new(T::lit(-0.3), T::zero()), -1),
        ],
    };
    (green_field(&charges, grid), charges)
}

/// Stream function of the swirl, `ψ = ½ cos(2x + 0.3) sin(1.5y) + ¼(x² − y²) + 0.3 xy`.
pub fn swirl_potential<T: Real>(p: Point<T>) -> T {
    let (x, y) = (p.x, p.y);
    T::lit(0.5) * (x + x + T::lit(0.3)).cos() * (T::lit(1.5) * y).sin()
        + T::lit(0.25) * (x * x - y * y)
        + T::lit(0.3) * x * y
}

/// `∇⊥ψ` of [`swirl_potential`] in closed form: smooth and divergence-free.
pub fn swirl_at<T: Real>(p: Point<T>) -> Point<T> {
    let (x, y) = (p.x, p.y);
    let a = x + x + T::lit(0.3);
    let b = T::lit(1.5) * y;
    let dpsi_dx = -a.sin() * b.sin() + T::lit(0.5) * x + T::lit(0.3) * y;
    let dpsi_dy = T::lit(0.75) * a.cos() * b.cos() - T::lit(0.5) * y + T::lit(0.3) * x;
    Point::new(dpsi_dy, -dpsi_dx)
}

pub fn swirl<T: Real>(grid: &GridSpec<T>) -> VectorField2D<T> {
    VectorField2D::from_fn(grid, |p| Some(swirl_at(p)))
}

/// Green field of `charges` plus the swirl.
pub fn charges_with_swirl<T: Real>(grid: &GridSpec<T>, charges: &ChargeSet<T>) -> VectorField2D<T> {
    green_field(charges, grid).add(&swirl(grid))
}

/// Charges of the lifted two-charge fixture.
pub fn two_charges<T: Real>() -> ChargeSet<T> {
    ChargeSet {
        charges: vec![
            Charge::new(Point::new(T::lit(-0.31), T::lit(0.17)), 1),
            Charge::new(Point::new(T::lit(0.27), T::lit(-0.22)), -1),
        ],
    }
}

/// `u = Arg(x − x₁) − Arg(x − x₂) + 0.3 sin(2x₁) cos(x₂)` and `V = ∇⊥u` by wrapped differences,
/// with nodes within `h` of a charge flagged singular.
pub fn lifted_two_charge<T: Real>(grid: &GridSpec<T>) -> (VectorField2D<T>, CircleValuedField<T>, ChargeSet<T>) {
    let charges = two_charges();
    let u = CircleValuedField::from_fn(grid, |p| {
        charges.phase(p) + T::lit(0.3) * (p.x + p.x).sin() * p.y.cos()
    });
    let mut v = unlift(&u);
    for k in 0..grid.node_count() {
        let q = grid.node_point(k);
        if charges.charges.iter().any(|c| c.location().dist(q) < grid.h) {
            v.set_singular(k);
        }
    }
    (v, u, charges)
}

/// Up to `max_charges` charges with `1 ≤ |n| ≤ max_degree`, inside the disk of radius `0.7`
/// about the domain center and at least `min_separation` apart.
pub fn random_charges<T: Real>(
    grid: &GridSpec<T>,
    max_charges: usize,
    max_degree: i64,
    min_separation: T,
    seed: u64,
) -> Result<ChargeSet<T>> {
    if max_charges == 0 || max_degree < 1 {
        return Err(Error::Precondition("need at least one charge of degree ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = grid.domain().bounds();
    let center = (lo + hi) * T::lit(0.5);
    let reach = T::lit(0.7) * (hi.x - lo.x).min(hi.y - lo.y) * T::lit(0.5);
    let count = rng.gen_range(1..=max_charges);
    let sep = min_separation.max(grid.h * T::lit(4.0));
    let mut out: Vec<Charge<T>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 {
            break;
        }
        let (s, t): (f64, f64) = (rng.gen(), rng.gen());
        let q = center + Point::polar(T::lit(t * std::f64::consts::TAU)) * (reach * T::lit(s.sqrt()));
        if out.iter().any(|c| c.location().dist(q) < sep) {
            continue;
        }
        let mut n = rng.gen_range(1..=max_degree);
        if rng.gen::<bool>() {
            n = -n;
        }
        out.push(Charge::new(q, n));
    }
    ChargeSet::new(out)
}

/// `u = Arg` with the weight `g = 1` on `0.2 ≤ |x|` and `0` inside.
pub fn arg_annulus<T: Real>(grid: &GridSpec<T>) -> (CircleValuedField<T>, GridFunction<T>) {
    let u = CircleValuedField::from_fn(grid, |p| p.angle());
    let g = GridFunction::from_fn(grid, |p| if p.norm() >= T::lit(0.2) { T::one() } else { T::zero() });
    (u, g)
}

/// `u = k·x mod 2π` with weight 1.
pub fn linear_phase<T: Real>(grid: &GridSpec<T>, k: Point<T>) -> (CircleValuedField<T>, GridFunction<T>) {
    let u = CircleValuedField::from_fn(grid, |p| k.dot(p));
    (u, GridFunction::constant(grid, T::one()))
}

/// Alternating-sign unit charges on a lattice of spacing `3ε`, as many as
/// `round(amplitude·ε^{p−2})`, nearest the domain center first and at least `2ε` inside.
///
/// Each vortex carries `‖·‖_p^p ≈ ε^{2−p}` on its own `ε`-ball, so the family keeps
/// `N ε^{2−p}` fixed while the number of bad balls grows like `ε^{p−2}`.
pub fn many_vortex_charges<T: Real>(grid: &GridSpec<T>, eps: T, p: T, amplitude: T) -> Result<ChargeSet<T>> {
    let want = (amplitude * eps.powf(p - T::lit(2.0))).round().as_f64().max(1.0) as usize;
    let domain = grid.domain();
    let (lo, hi) = domain.bounds();
    let center = (lo + hi) * T::lit(0.5);
    let step = eps * T::lit(3.0);
    let m = ((hi.x - lo.x).max(hi.y - lo.y) / step).ceil().as_f64() as i64 + 1;
    let mut sites: Vec<(i64, i64, Point<T>)> = Vec::new();
    for a in -m..=m {
        for b in -m..=m {
            let q = center + Point::new(T::lit(a as f64 + 0.5), T::lit(b as f64 + 0.5)) * step;
            if domain.signed_distance(q) <= -(eps + eps) {
                sites.push((a, b, q));
            }
        }
    }
    sites.sort_by(|x, y| (x.2 - center).norm().total_cmp_real(&(y.2 - center).norm()));
    if sites.len() < want {
        return Err(Error::Geometry(format!("only {} lattice sites for {want} vortices at ε = {eps}", sites.len())));
    }
    let charges = sites[..want]
        .iter()
        .map(|&(a, b, q)| Charge::new(q, if (a + b).rem_euclid(2) == 0 { 1 } else { -1 }))
        .collect();
    ChargeSet::new(charges)
}

trait TotalCmp {
    fn total_cmp_real(&self, other: &Self) -> std::cmp::Ordering;
}

impl<T: Real> TotalCmp for T {
    fn total_cmp_real(&self, other: &Self) -> std::cmp::Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}
