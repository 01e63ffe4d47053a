//! Scalar abstraction: the numeric element type used throughout the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable in every solver and container: `f32` or `f64`.
///
/// Tolerances in this crate are stated for `f64`; validation thresholds widen
/// to a small multiple of machine epsilon for narrower types.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + ScalarOperand
    + LinalgScalar
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Cast from `f64`. Well-defined for `f32`/`f64` (may round).
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 not representable in scalar type")
    }

    /// Cast to `f64` for reporting.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// A spec tolerance, widened for low-precision scalars:
    /// `max(tol, 16 * epsilon)`.
    fn tol(tol: f64) -> Self {
        let eps = Self::epsilon() * Self::from_f64_c(16.0);
        Self::from_f64_c(tol).max(eps)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + ScalarOperand
        + LinalgScalar
        + Display
        + LowerExp
        + Debug
        + Send
        + Sync
        + 'static
{
}
