//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the largest score, ties broken towards the lowest index.
///
/// NaN scores are never selected unless every score is NaN, in which case 0 is returned.
pub fn argmax_lowest<T: Scalar>(scores: impl IntoIterator<Item = T>) -> usize {
    let mut best_idx = 0;
    let mut best: Option<T> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if s <= b => {}
            _ => {
                best = Some(s);
                best_idx = i;
            }
        }
    }
    best_idx
}
