//! Floating-point element type for embeddings, centroids and index storage.
//!
//! Vectors are stored as `T` but every distance is accumulated in `f64`, in
//! coordinate order, so search results are bitwise reproducible for a given
//! storage type regardless of how queries are spread across threads.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of embedding vectors: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Widen to the accumulation type.
    fn to_acc(self) -> f64;

    /// Narrow from the accumulation type (round to nearest).
    fn from_acc(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn to_acc(self) -> f64 {
        self as f64
    }

    #[inline]
    fn from_acc(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_acc(self) -> f64 {
        self
    }

    #[inline]
    fn from_acc(v: f64) -> Self {
        v
    }
}

/// Squared L2 distance, accumulated sequentially in `f64`.
#[inline]
pub fn squared_l2<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x.to_acc() - y.to_acc();
        acc += d * d;
    }
    acc
}

/// True (square-rooted) L2 distance.
#[inline]
pub fn l2<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    squared_l2(a, b).sqrt()
}

/// Dot product accumulated in `f64`.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_acc() * y.to_acc()).sum()
}

/// L2 distance between unit vectors expressed through their cosine similarity:
/// `d = sqrt(2 (1 - cos))`.
pub fn unit_l2_from_cosine(cos: f64) -> f64 {
    (2.0 * (1.0 - cos)).max(0.0).sqrt()
}

/// Cosine similarity of unit vectors at L2 distance `d`: `cos = 1 - d^2 / 2`.
///
/// A threshold of 0.25 corresponds to `cos >= 0.96875`.
pub fn cosine_from_unit_l2(d: f64) -> f64 {
    1.0 - d * d / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_matches_hand_values() {
        assert_eq!(l2(&[1.0f32, 0.0], &[1.0, 0.0]), 0.0);
        assert!((l2(&[1.0f32, 0.0], &[0.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(l2(&[3.0f64, 0.0], &[0.0, 4.0]), 5.0);
    }

    #[test]
    fn threshold_cosine_equivalence() {
        assert!((cosine_from_unit_l2(0.25) - 0.96875).abs() < 1e-12);
        assert!((unit_l2_from_cosine(0.96875) - 0.25).abs() < 1e-12);
    }
}
