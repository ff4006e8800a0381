//! Scalar abstraction shared by the numeric kernels.
//!
//! Every formula in [`crate::accounting`], [`crate::colocation`] and
//! [`crate::solver`] is written against [`Real`], so the same code runs in
//! `f32` for cheap sweeps and `f64` for the reference runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or configuration value.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion back to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_roundtrip() {
        assert_eq!(f64::lit(0.1).as_f64(), 0.1);
        assert!((f32::lit(0.1).as_f64() - 0.1).abs() < 1e-7);
    }
}
