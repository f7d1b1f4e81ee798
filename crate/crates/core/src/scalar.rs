//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Real`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Deterministic sum with pairwise reduction; the result does not depend on
/// thread scheduling as long as the slice order is fixed.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= 8 {
        return xs.iter().copied().fold(T::zero(), |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean.
pub fn mean<T: Real>(xs: &[T]) -> T {
    pairwise_sum(xs) / lit::<T>(xs.len() as f64)
}

/// Unbiased sample standard deviation (n - 1 denominator).
pub fn sample_std<T: Real>(xs: &[T]) -> T {
    let n = xs.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let sq: Vec<T> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / lit::<T>((n - 1) as f64)).sqrt()
}

/// Standard error of the mean: `std / sqrt(n)`.
pub fn std_error<T: Real>(xs: &[T]) -> T {
    sample_std(xs) / lit::<T>(xs.len() as f64).sqrt()
}

/// Median of a sample (average of the two central order statistics for even
/// lengths). Panics on empty input.
pub fn median<T: Real>(xs: &[T]) -> T {
    assert!(!xs.is_empty(), "median of empty sample");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / lit::<T>(2.0)
    }
}
