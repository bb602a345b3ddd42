//! Scalar abstraction for the floating-point parts of the crate.
//!
//! Geometry, metrics, and graph costs are written against [`Real`] so the
//! whole pipeline can run in `f32` or `f64`; the crate root fixes `f64` as
//! the default through type aliases.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable everywhere the crate does real arithmetic.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a count; counts in this crate stay far below
    /// 2^53 so the conversion is exact for `f64` and merely rounded for `f32`.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).unwrap_or_else(|| Self::max_value())
    }

    /// Parses a decimal literal by way of `f64`, which round-trips the
    /// shortest representation of both `f32` and `f64` values.
    fn parse(text: &str) -> Option<Self> {
        text.parse::<f64>().ok().and_then(Self::from_f64)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}
