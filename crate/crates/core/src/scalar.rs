//! Scalar abstraction for score arithmetic.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like number type the quality functions are evaluated in.
///
/// Implemented for `f32`, `f64` and [`num_rational::Rational64`]. Everything
/// the scores need is ordered field arithmetic plus `abs`; no transcendental
/// functions, which is what makes the exact rational instantiation possible.
pub trait Scalar:
    Num + Signed + PartialOrd + Copy + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_count(n as u64)
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for num_rational::Rational64 {}

/// Sum in iteration order.
pub(crate) fn sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    values.into_iter().fold(S::zero(), |acc, v| acc + v)
}
