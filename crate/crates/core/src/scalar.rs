//! Scalar abstraction shared by every module.
//!
//! All numerical routines are generic over [`Scalar`], which is implemented for
//! `f32` and `f64`. Random draws are always generated in `f64` and then cast, so
//! a given seed yields the same stream regardless of the working precision.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point type usable by the lab: f32 or f64.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 is representable in every Scalar")
}

/// Converts a working scalar into `f64` (used for reporting and errors).
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
