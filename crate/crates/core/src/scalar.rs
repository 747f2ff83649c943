//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real field the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are tuned
/// for `f64`; `f32` works for evaluation but not for the tight quadrature and
/// optimizer tolerances.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `log(exp(a) + exp(b))` without overflow.
    #[inline]
    fn log_add_exp(a: Self, b: Self) -> Self {
        if a == Self::neg_infinity() {
            return b;
        }
        if b == Self::neg_infinity() {
            return a;
        }
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        hi + (lo - hi).exp().ln_1p()
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Sum
        + Send
        + Sync
        + 'static
{
}
