//! Discrete L^p norms and the directional description of `|V|^p`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::VectorField2D;
use crate::quad::adaptive_gk;
use crate::scalar::Real;

/// An integrability exponent `p ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent<T>(T);

impl<T: Real> Exponent<T> {
    /// Any `p ≥ 1`.
    pub fn new(p: T) -> Result<Self> {
        if p >= T::one() && p.is_finite() {
            Ok(Exponent(p))
        } else {
            Err(Error::OutOfRange(format!("exponent must be finite and ≥ 1, got {p}")))
        }
    }

    /// Exponents admitted by the approximation and lifting pipeline (`p > 1`).
    pub fn pipeline(p: T) -> Result<Self> {
        if p > T::one() && p.is_finite() {
            Ok(Exponent(p))
        } else {
            Err(Error::OutOfRange(format!("pipeline requires p > 1, got {p}")))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// `(Σ_cells |V_mid|^p h²)^{1/p}` over active cells without singular corners.
pub fn lp_norm<T: Real>(v: &VectorField2D<T>, p: Exponent<T>) -> Result<T> {
    v.check_finite()?;
    Ok(lp_norm_where(v, p, |_, _| true).powf(T::one() / p.get()))
}

/// `Σ |V_mid|^p h²` over active regular cells accepted by `keep`.
pub fn lp_norm_where<T: Real>(v: &VectorField2D<T>, p: Exponent<T>, keep: impl Fn(usize, usize) -> bool) -> T {
    let g = &v.grid;
    let h2 = g.h * g.h;
    let mut acc = T::zero();
    for j in 0..g.ny {
        for i in 0..g.nx {
            if !keep(i, j) {
                continue;
            }
            if let Some(m) = v.cell_mid(i, j) {
                acc = acc + m.norm().powf(p.get()) * h2;
            }
        }
    }
    acc
}

/// `c_p = ∫₀^{2π} |cos γ|^p dγ` by adaptive quadrature.
pub fn c_p<T: Real>(p: Exponent<T>) -> T {
    let p = p.get();
    // symmetric quarter-period; the endpoint behaviour at π/2 is handled adaptively
    let tol = T::lit(1e-13).max(T::epsilon() * T::lit(16.0));
    let (quarter, _) = adaptive_gk(|g: T| g.cos().max(T::zero()).powf(p), T::zero(), T::FRAC_PI_2(), tol, 4000)
        .expect("c_p integrand is bounded and monotone");
    quarter * T::lit(4.0)
}

/// Worst relative error of the equispaced-direction formula for `|V|^p` over regular nodes.
pub fn directional_norm_check<T: Real>(v: &VectorField2D<T>, p: Exponent<T>, ndirs: usize) -> Result<T> {
    if ndirs < 8 {
        return Err(Error::Precondition(format!("ndirs must be ≥ 8, got {ndirs}")));
    }
    let cp = c_p(p);
    let pe = p.get();
    let dirs: Vec<(T, T)> = (0..ndirs)
        .map(|k| {
            let a = T::two_pi() * T::lit(k as f64 / ndirs as f64);
            (a.cos(), a.sin())
        })
        .collect();
    let weight = T::two_pi() / T::lit(ndirs as f64) / cp;
    let worst = (0..v.grid.node_count())
        .into_par_iter()
        .filter(|&k| v.is_regular(k))
        .map(|k| {
            let w = v.at(k);
            let exact = w.norm().powf(pe);
            let approx: T = dirs.iter().map(|&(c, s)| (w.x * c + w.y * s).abs().powf(pe)).sum::<T>() * weight;
            if exact == T::zero() {
                approx.abs()
            } else {
                (approx - exact).abs() / exact
            }
        })
        .reduce(T::zero, T::max);
    Ok(worst)
}
