use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar the metric and fitting code is generic over: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` constant, panicking only for values the type cannot represent at all.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A few ulps of slack scaled to `magnitude`, used for strict comparisons of metric deltas.
    fn noise_floor(magnitude: Self) -> Self {
        Self::epsilon() * Self::lit(64.0) * magnitude.abs().max(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
