use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric kernels are generic over.
///
/// Implemented for `f32` and `f64`. The associated tolerance scales with
/// the precision of the type so that label sums produced by interpolation
/// arithmetic validate under both widths.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + for<'a> Sum<&'a Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance on the probability sum of a soft label.
    fn simplex_tolerance() -> Self;

    /// Shorthand for the lossy `f64 -> Self` conversion.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to scalar")
    }
}

impl Scalar for f64 {
    fn simplex_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn simplex_tolerance() -> Self {
        1e-4
    }
}
