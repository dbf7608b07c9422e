//! Numeric traits the rest of the crate is generic over.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Similarity score produced by a scorer: `f32` or `f64`.
pub trait Score:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl Score for f32 {}
impl Score for f64 {}

/// Scalar used for ratio thresholds over pixel counts.
///
/// Floating point types work for ordinary configuration; exact rationals
/// (`num_rational::Ratio<i64>`) make boundary comparisons exact.
pub trait Ratio: Num + PartialOrd + Copy + FromPrimitive + Debug + Send + Sync + 'static {}

impl<T> Ratio for T where T: Num + PartialOrd + Copy + FromPrimitive + Debug + Send + Sync + 'static {}

/// Lossless-enough conversion of a pixel count into the ratio scalar.
pub(crate) fn from_count<T: Ratio>(n: u64) -> T {
    T::from_u64(n).expect("pixel count representable in ratio scalar")
}
