//! Sigmoid output head and the joint binary cross-entropy.

use crate::scalar::Scalar;

pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub fn sigmoid_head<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|&v| sigmoid(v)).collect()
}

/// Cross-entropy of one sample, summed over its labels.
pub fn sample_bce<S: Scalar>(pred: &[S], truth: &[bool]) -> S {
    let lo = S::lit(PROB_CLAMP);
    let hi = S::one() - lo;
    pred.iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let p = p.max(lo).min(hi);
            if t {
                -p.ln()
            } else {
                -(S::one() - p).ln()
            }
        })
        .sum()
}

/// Mean over samples of the per-sample summed cross-entropy.
pub fn bce_loss<S: Scalar>(pred: &[Vec<S>], truth: &[Vec<bool>]) -> S {
    if pred.is_empty() {
        return S::zero();
    }
    let total: S = pred.iter().zip(truth).map(|(p, t)| sample_bce(p, t)).sum();
    total / S::lit(pred.len() as f64)
}
