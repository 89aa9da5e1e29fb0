// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the detectors are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for constants and user-supplied parameters.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `x * ln(x)` with the convention `0 * ln 0 = 0`.
    fn xlogx(self) -> Self {
        if self <= Self::zero() {
            Self::zero()
        } else {
            self * self.ln()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xlogx_zero_convention() {
        assert_eq!(0.0_f64.xlogx(), 0.0);
        assert_eq!(1.0_f32.xlogx(), 0.0);
        assert!((2.0_f64.xlogx() - 2.0 * 2.0_f64.ln()).abs() < 1e-15);
    }
}
