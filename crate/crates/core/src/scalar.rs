//! Floating-point abstraction shared by every numeric kernel in the crate.
//!
//! Data loaded from disk (dataset annotations, lexicon scores, embeddings)
//! is parsed as `f64` and converted once into the working scalar `S`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by the numeric code (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Short name used in persisted manifests.
    fn type_name() -> &'static str;
}

impl Scalar for f32 {
    fn type_name() -> &'static str {
        "f32"
    }
}

impl Scalar for f64 {
    fn type_name() -> &'static str {
        "f64"
    }
}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(xs: &[S]) -> Vec<S> {
    if xs.is_empty() {
        return Vec::new();
    }
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = xs.iter().map(|&x| (x - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_in_both_precisions() {
        let p64 = softmax(&[1.0f64, 2.0, 3.0]);
        let p32 = softmax(&[1.0f32, 2.0, 3.0]);
        assert!((p64.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p32.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(p64[2] > p64[1] && p64[1] > p64[0]);
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let p = softmax(&[1000.0f64, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }
}
