//! Scalar abstraction shared by every numeric model in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the models are generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + ndarray::LinalgScalar
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every constant in the crate is representable.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn sigmoid(self) -> Self {
        // Split on sign so exp never overflows.
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable in-place softmax. Returns the log of the normalizer.
pub fn softmax_in_place<F: Scalar>(scores: &mut [F]) -> F {
    let max = scores
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, s| if s > m { s } else { m });
    let mut total = F::zero();
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total = total + *s;
    }
    for s in scores.iter_mut() {
        *s = *s / total;
    }
    max + total.ln()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<F: PartialOrd + Copy>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_saturates() {
        assert_eq!(0.0f64.sigmoid(), 0.5);
        let a = 3.0f64.sigmoid();
        let b = (-3.0f64).sigmoid();
        assert!((a + b - 1.0).abs() < 1e-15);
        assert!(1000.0f64.sigmoid().is_finite());
        assert!((-1000.0f64).sigmoid() >= 0.0);
    }

    #[test]
    fn softmax_handles_large_scores() {
        let mut s = [1000.0f64, 1000.0, 999.0];
        softmax_in_place(&mut s);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s[0] - s[1]).abs() < 1e-15);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0f32; 4]), 0);
    }
}
