//! Adam over a list of flat parameter tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<S> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(learning_rate: f64, sizes: &[usize]) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<S: Scalar>(params: &mut [&mut [S]], grads: &[&[S]], state: &mut AdamState<S>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape("parameter, gradient and moment lists differ in length"));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::shape("parameter and gradient tensors differ in size"));
        }
    }
    state.t += 1;
    let (b1, b2) = (S::lit(state.beta1), S::lit(state.beta2));
    let c1 = S::one() - S::lit(state.beta1.powi(state.t as i32));
    let c2 = S::one() - S::lit(state.beta2.powi(state.t as i32));
    let lr = S::lit(state.learning_rate);
    let eps = S::lit(state.eps);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (S::one() - b1) * g[i];
            v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let mut p = vec![0.5f64, -2.0];
        let mut st = AdamState::new(0.01, &[2]);
        adam_step(&mut [p.as_mut_slice()], &[&[1.0, 1.0]], &mut st).unwrap();
        let delta = -0.01 / (1.0 + 1e-8);
        assert!((p[0] - (0.5 + delta)).abs() < 1e-15);
        assert!((p[1] - (-2.0 + delta)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = vec![1.0f64];
        let mut st = AdamState::new(0.1, &[1]);
        adam_step(&mut [p.as_mut_slice()], &[&[0.0]], &mut st).unwrap();
        assert_eq!(p[0], 1.0);
        adam_step(&mut [p.as_mut_slice()], &[&[2.0]], &mut st).unwrap();
        let after_first = p[0];
        let (m, v) = (st.m[0][0], st.v[0][0]);
        st.learning_rate = 0.0;
        adam_step(&mut [p.as_mut_slice()], &[&[0.0]], &mut st).unwrap();
        assert_eq!(p[0], after_first);
        assert!((st.m[0][0] - 0.9 * m).abs() < 1e-15);
        assert!((st.v[0][0] - 0.999 * v).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = vec![0.1f64, 0.2, 0.3];
            let mut st = AdamState::new(0.05, &[3]);
            for i in 0..10 {
                let g = [i as f64, -1.0, 0.5];
                adam_step(&mut [p.as_mut_slice()], &[&g], &mut st).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
        let mut p = vec![0.0f64];
        let mut st = AdamState::new(0.1, &[1]);
        assert!(adam_step(&mut [p.as_mut_slice()], &[&[1.0, 2.0]], &mut st).is_err());
    }
}
