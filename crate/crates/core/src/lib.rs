//! Circle-valued lifting of planar vector fields whose divergence is quantized.
//!
//! A field `V ∈ L^p(Ω, ℝ²)`, `p > 1`, has `div V = 2π ∂I` for an integer-multiplicity
//! 1-current `I` exactly when `V = ∇⊥u` for a map `u : Ω → ℝ/2πℤ`. This crate works with
//! sampled versions of all of these objects:
//!
//! * [`grid`] and [`norms`]: sampled fields, discrete L^p norms, the directional norm identity.
//! * [`flux`]: circle fluxes, winding numbers and boundary degrees.
//! * [`currents`]: polyline currents, boundaries, circle slices, level-set extraction, coarea.
//! * [`cover`]: shifted ball covers with controlled boundary flux, good/bad classification.
//! * [`approx`]: approximation by fields with finitely many point singularities.
//! * [`lifting`]: `V ↦ u` by spanning-tree integration and `u ↦ ∇⊥u`.
//! * [`counterexample`]: dipole currents whose boundary is no L^p divergence.
//!
//! The rotated gradient is fixed as `∇⊥u = (∂₂u, −∂₁u)`, so `u = Arg` lifts `x/|x|²`.
//! Everything is generic over [`Real`] (`f32`/`f64`); the aliases below pin `f64`.

pub mod approx;
pub mod counterexample;
pub mod cover;
pub mod currents;
pub mod error;
pub mod fixtures;
pub mod flux;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lifting;
pub mod norms;
pub mod quad;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type Point = geometry::Point<f64>;
pub type Circle = geometry::Circle<f64>;
pub type Domain = geometry::Domain<f64>;
pub type GridSpec = grid::GridSpec<f64>;
pub type VectorField = grid::VectorField2D<f64>;
pub type CircleField = grid::CircleValuedField<f64>;
pub type GridFunction = grid::GridFunction<f64>;
pub type Exponent = norms::Exponent<f64>;
pub type PolylineCurrent = currents::PolylineCurrent<f64>;
pub type SliceResult = currents::SliceResult<f64>;
pub type ChargeSet = lifting::ChargeSet<f64>;
pub type LiftResult = lifting::LiftResult<f64>;
pub type BallCover = cover::BallCover<f64>;
pub type CircleTrace = approx::CircleTrace<f64>;
pub type ApproxReport = approx::ApproxReport<f64>;
pub type DipoleSequence = counterexample::DipoleSequence<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type GridSpec = crate::grid::GridSpec<f32>;
    pub type VectorField = crate::grid::VectorField2D<f32>;
    pub type CircleField = crate::grid::CircleValuedField<f32>;
    pub type Exponent = crate::norms::Exponent<f32>;
}
