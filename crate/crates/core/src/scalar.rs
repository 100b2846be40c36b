//! Floating-point scalar abstraction shared by every estimator in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for survival times, feature values and estimator outputs.
///
/// Implemented for `f32` and `f64`. Missing feature values are encoded as NaN.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts a count to the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    /// Converts an `f64` literal to the scalar type (rounding for `f32`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Missing-value marker.
#[inline]
pub fn missing<S: Scalar>() -> S {
    S::nan()
}

#[inline]
pub fn is_missing<S: Scalar>(x: S) -> bool {
    x.is_nan()
}
