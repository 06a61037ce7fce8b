//! Quantization observables: circle fluxes, winding numbers, boundary degrees.
//!
//! Fluxes are reported in the `2π` normalization: a field with `div V = 2π Σ nᵢ δ_{xᵢ}` has
//! flux `2π Σ_{xᵢ inside} nᵢ` through a circle, and [`FluxResult::quantum`] is that integer sum.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Circle, Point};
use crate::grid::{CircleValuedField, Sample, VectorField2D};
use crate::quad::periodic_trapezoid;
use crate::scalar::{wrap_diff, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct FluxResult<T> {
    /// `∮ V·n dH¹`.
    pub value: T,
    /// Nearest integer to `value / 2π`.
    pub quantum: i64,
    /// `|value − 2π·quantum|`, in `[0, π]`.
    pub residual: T,
    /// Estimated quadrature error.
    pub error_estimate: T,
}

impl<T: Real> FluxResult<T> {
    pub fn from_value(value: T, error_estimate: T) -> Self {
        let q = (value / T::two_pi()).round();
        FluxResult {
            value,
            quantum: q.as_f64() as i64,
            residual: (value - q * T::two_pi()).abs(),
            error_estimate,
        }
    }
}

/// Smallest power of two `≥ max(min, 2πR / spacing)`.
pub(crate) fn circle_samples<T: Real>(radius: T, spacing: T, min: usize) -> usize {
    let n = (T::two_pi() * radius / spacing).ceil().as_f64().max(1.0) as usize;
    n.max(min).next_power_of_two()
}

/// Checks that a circle lies inside the domain and is resolvable on the grid.
pub(crate) fn check_circle<T: Real>(v_grid: &crate::grid::GridSpec<T>, c: &Circle<T>) -> Result<()> {
    if !(c.radius > T::zero()) || !c.center.is_finite() {
        return Err(Error::Geometry("circle needs a finite center and positive radius".into()));
    }
    if c.radius < v_grid.h + v_grid.h {
        return Err(Error::Geometry(format!("radius {} below 2h = {}", c.radius, v_grid.h + v_grid.h)));
    }
    if v_grid.domain().signed_distance(c.center) + c.radius >= T::zero() {
        return Err(Error::Geometry(format!(
            "circle at ({}, {}) radius {} exits the domain",
            c.center.x, c.center.y, c.radius
        )));
    }
    Ok(())
}

/// `∮_{∂B} V·n dH¹` by periodic trapezoid refinement of the bilinear interpolant.
pub fn circle_flux<T: Real>(v: &VectorField2D<T>, c: &Circle<T>, tol: T) -> Result<FluxResult<T>> {
    check_circle(&v.grid, c)?;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |theta: T| {
        let n = Point::polar(theta);
        let p = c.center + n * c.radius;
        match v.try_sample(p) {
            Sample::Value(w) => w.dot(n) * c.radius,
            other => {
                failure.borrow_mut().get_or_insert_with(|| {
                    let what = if other == Sample::Singular { "touches a singular node" } else { "leaves the mask" };
                    Error::Geometry(format!("circle at ({}, {}) radius {} {what}", c.center.x, c.center.y, c.radius))
                });
                T::zero()
            }
        }
    };
    let n0 = circle_samples(c.radius, v.grid.h, 64);
    let result = periodic_trapezoid(integrand, n0, tol, 1 << 22);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (value, err, _) = result?;
    Ok(FluxResult::from_value(value, err))
}

/// Degree of `u` along a closed polyline (the closing segment is implied).
///
/// The curve is resampled at spacing `h/2`; a wrapped increment of at least `π/2` between
/// consecutive samples is reported as aliasing.
pub fn winding_degree<T: Real>(u: &CircleValuedField<T>, curve: &[Point<T>]) -> Result<i64> {
    if curve.len() < 3 {
        return Err(Error::Geometry("closed curve needs at least 3 vertices".into()));
    }
    let spacing = u.grid.h * T::lit(0.5);
    let mut samples = Vec::with_capacity(curve.len() * 2);
    for (k, &a) in curve.iter().enumerate() {
        let b = curve[(k + 1) % curve.len()];
        let m = ((a.dist(b) / spacing).ceil().as_f64() as usize).max(1);
        for s in 0..m {
            let t = T::lit(s as f64 / m as f64);
            let q = a + (b - a) * t;
            if let Some((i, j, _, _)) = u.grid.locate(q) {
                let c = u.grid.cell_corners(i, j);
                if (0..4).any(|e| wrap_diff(u.theta[c[(e + 1) % 4]] - u.theta[c[e]]).abs() >= T::FRAC_PI_2()) {
                    return Err(Error::Aliasing(format!("grid increment ≥ π/2 near ({}, {}); refine the grid", q.x, q.y)));
                }
            }
            samples.push(u.sample(q)?);
        }
    }
    let limit = T::FRAC_PI_2();
    let mut total = T::zero();
    for k in 0..samples.len() {
        let d = wrap_diff(samples[(k + 1) % samples.len()] - samples[k]);
        if d.abs() >= limit {
            return Err(Error::Aliasing(format!("increment {d} between curve samples; refine the grid")));
        }
        total = total + d;
    }
    Ok((total / T::two_pi()).round().as_f64() as i64)
}

/// Degree of `u` along the mask boundary, traversed counterclockwise two cells inside.
pub fn boundary_degree<T: Real>(u: &CircleValuedField<T>) -> Result<i64> {
    let h = u.grid.h;
    let curve = u.grid.domain().inset_boundary(h + h, h * T::lit(0.5));
    winding_degree(u, &curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::TAU;

    fn vortex(c: Point<f64>, n: f64) -> impl Fn(Point<f64>) -> Option<Point<f64>> {
        move |p| {
            let d = p - c;
            let r2 = d.norm2();
            (r2 > 1e-12).then(|| d * (n / r2))
        }
    }

    #[test]
    fn model_vortex_flux_is_one_quantum() {
        let g = GridSpec::<f64>::unit_disk(128).unwrap();
        let v = VectorField2D::from_fn(&g, vortex(Point::zero(), 1.0));
        let f = circle_flux(&v, &Circle::new(Point::zero(), 0.5), 1e-8).unwrap();
        assert_eq!(f.quantum, 1);
        assert!((f.value - TAU).abs() < 1e-3, "{}", f.value);
    }

    #[test]
    fn constant_field_has_zero_flux() {
        let g = GridSpec::<f64>::unit_disk(64).unwrap();
        let v = VectorField2D::from_fn(&g, |_| Some(Point::new(0.3, -1.2)));
        let f = circle_flux(&v, &Circle::new(Point::new(0.1, 0.2), 0.4), 1e-10).unwrap();
        assert_eq!(f.quantum, 0);
        assert!(f.value.abs() < 1e-10);
    }

    #[test]
    fn dipole_enclosed_cancels() {
        let g = GridSpec::<f64>::unit_disk(128).unwrap();
        let a = Point::new(-0.2, 0.0);
        let b = Point::new(0.25, 0.1);
        let (fa, fb) = (vortex(a, 1.0), vortex(b, -1.0));
        let v = VectorField2D::from_fn(&g, |p| Some(fa(p)? + fb(p)?));
        let both = circle_flux(&v, &Circle::new(Point::zero(), 0.6), 1e-8).unwrap();
        assert_eq!(both.quantum, 0);
        assert!(both.residual < 1e-2);
        assert_eq!(circle_flux(&v, &Circle::new(a, 0.15), 1e-8).unwrap().quantum, 1);
        assert_eq!(circle_flux(&v, &Circle::new(b, 0.15), 1e-8).unwrap().quantum, -1);
    }

    #[test]
    fn circle_leaving_mask_is_geometry_error() {
        let g = GridSpec::<f64>::unit_disk(32).unwrap();
        let v = VectorField2D::zeros(&g);
        assert!(matches!(circle_flux(&v, &Circle::new(Point::new(0.5, 0.0), 0.6), 1e-6), Err(Error::Geometry(_))));
        assert!(matches!(circle_flux(&v, &Circle::new(Point::zero(), 0.01), 1e-6), Err(Error::Geometry(_))));
    }

    #[test]
    fn winding_of_arg_multiples() {
        let g = GridSpec::<f64>::unit_disk(128).unwrap();
        let circle = Circle::new(Point::zero(), 0.8).polyline(400);
        for n in [0i64, 1, 3, -2] {
            let u = CircleValuedField::from_fn(&g, |p| n as f64 * p.angle());
            assert_eq!(winding_degree(&u, &circle).unwrap(), n);
        }
        let c = CircleValuedField::from_fn(&g, |_| 1.0);
        assert_eq!(boundary_degree(&c).unwrap(), 0);
        let arg = CircleValuedField::from_fn(&g, |p| p.angle());
        assert_eq!(boundary_degree(&arg).unwrap(), 1);
    }

    #[test]
    fn aliasing_detected() {
        let g = GridSpec::<f64>::centered_square(1.0, 16).unwrap();
        let u = CircleValuedField::from_fn(&g, |p| 14.0 * p.x);
        let r = winding_degree(&u, &Circle::new(Point::zero(), 0.5).polyline(64));
        assert!(matches!(r, Err(Error::Aliasing(_))));
    }
}
