//! Scalar abstractions.
//!
//! Phase-space numerics are generic over [`Real`] (`f32` or `f64`). The
//! closure algebra is generic over [`Field`], which additionally admits exact
//! rationals so that the moment-closure matrices can be checked identically.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssign};
use rustfft::FftNum;

/// Floating point scalar usable on phase-space grids: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FftNum + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("usize representable")
    }

    /// Lossy conversion to `f64`, used for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact or floating scalar field for polynomial / moment algebra.
pub trait Field: Num + Clone + Neg<Output = Self> + FromPrimitive + PartialEq + Debug + Display {
    /// `num / den` as a field element.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer representable") / Self::from_i64(den).expect("integer representable")
    }

    fn int(x: i64) -> Self {
        Self::from_i64(x).expect("integer representable")
    }
}

impl Field for f32 {}
impl Field for f64 {}
impl Field for BigRational {}

/// Exact rational used by the golden closure tests.
pub type Rational = BigRational;

/// Builds an exact rational `num / den`.
pub fn rational(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
