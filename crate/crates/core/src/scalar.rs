//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the toolkit can run on: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Debug
    + Display
    + Default
    + Sum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; infallible for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle difference into `(-π, π]`.
#[inline]
pub fn wrap_diff<T: Real>(d: T) -> T {
    let tau = T::two_pi();
    let mut w = d - tau * (d / tau).round();
    if w <= -T::PI() {
        w = w + tau;
    } else if w > T::PI() {
        w = w - tau;
    }
    w
}

/// Reduces an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::two_pi();
    let mut w = a - tau * (a / tau).floor();
    if w >= tau || w < T::zero() {
        w = T::zero();
    }
    w
}
