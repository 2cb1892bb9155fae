//! Floating point scalar abstraction shared by the geometry and sensing code.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point type the geometric core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for the supported types.
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 literal representable")
    }

    /// Lossy widening to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
