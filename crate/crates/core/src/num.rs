//! Scalar abstraction shared by the geometry, weight and sampling math.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for weights, distances and probabilities.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every `Real` can represent finite f64 values approximately.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to Real")
    }

    fn of_u64(v: u64) -> Self {
        Self::from_u64(v).expect("u64 converts to Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Tolerance used when checking that a probability vector sums to one.
pub fn unit_sum_tolerance<T: Real>() -> T {
    // f32 cannot hold 1e-9 relative precision over long vectors
    if std::mem::size_of::<T>() < 8 {
        T::of(1e-5)
    } else {
        T::of(1e-9)
    }
}
