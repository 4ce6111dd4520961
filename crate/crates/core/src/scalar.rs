//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Scalar`], which is implemented for
//! `f32` and `f64`. Default tolerances are tuned for `f64`; single precision
//! callers should start from [`crate::Tolerances::single_precision`].

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar usable by the certification routines.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + LowerExp + 'static
{
    /// Converts an `f64` literal or configuration value into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Lossy conversion to `f64`, used for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    /// Machine epsilon of the scalar type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.375), 0.375);
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f32::lit(0.25).as_f64(), 0.25);
        assert!(!f64::lit(f64::NAN).is_finite_value());
    }
}
