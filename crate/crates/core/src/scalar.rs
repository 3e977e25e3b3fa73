use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar used for every probability, log-probability and
/// advantage in the crate. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Absolute slack allowed when checking that a distribution sums to one.
    const NORMALIZATION_TOL: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64()
            .expect("finite or infinite float converts to f64")
    }

    #[inline]
    fn from_count(c: usize) -> Self {
        Self::from_usize(c).expect("count representable")
    }
}

impl Real for f32 {
    const NORMALIZATION_TOL: f64 = 1e-5;
}

impl Real for f64 {
    const NORMALIZATION_TOL: f64 = 1e-9;
}
