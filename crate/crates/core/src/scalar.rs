use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the statistical layers.
///
/// Special functions (normal and Student-t tails, incomplete gamma) are
/// evaluated in `f64` and converted back, so `f32` instances trade accuracy
/// for memory only in the bulk arithmetic.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn of_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer is representable")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count is representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
