//! Fully connected layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convnet::conv::relu;
use crate::convnet::regularizer::{coefficient_mask, RegularizerConfig};
use crate::error::{Error, Result};
use crate::matrix::{glorot_uniform, Matrix};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_HIDDEN: [usize; 1] = [128];

/// `outputs × inputs` weights and one bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> DenseLayer<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![S::zero(); outputs],
        }
    }

    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weights: Matrix::from_vec(outputs, inputs, glorot_uniform(outputs * inputs, inputs, outputs, rng)),
            bias: vec![S::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// `x = b + (coeffs ⊙ W) z`; raw weights when `coeffs` is `None`.
pub fn affine<S: Scalar>(z_prev: &[S], layer: &DenseLayer<S>, coeffs: Option<&Matrix<S>>) -> Result<Vec<S>> {
    if z_prev.len() != layer.inputs() {
        return Err(Error::shape(format!(
            "layer expects {} inputs, got {}",
            layer.inputs(),
            z_prev.len()
        )));
    }
    Ok((0..layer.outputs())
        .map(|k| {
            let w = layer.weights.row(k);
            let s = match coeffs {
                None => dot(w, z_prev),
                Some(c) => w
                    .iter()
                    .zip(c.row(k))
                    .zip(z_prev)
                    .fold(S::zero(), |acc, ((&wv, &cv), &z)| acc + cv * wv * z),
            };
            layer.bias[k] + s
        })
        .collect())
}

/// Pre-activation `x` and activation `z` of one layer.
///
/// In train mode the weights are rescaled by the regularizer's coefficients;
/// inference always uses the raw weights.
pub fn dense_forward<S: Scalar, R: Rng + ?Sized>(
    z_prev: &[S],
    layer: &DenseLayer<S>,
    reg: &RegularizerConfig,
    mode: Mode,
    activation: Activation,
    rng: &mut R,
) -> Result<(Vec<S>, Vec<S>)> {
    let coeffs = match mode {
        Mode::Train => coefficient_mask(&layer.weights, reg, rng)?,
        Mode::Infer => None,
    };
    let x = affine(z_prev, layer, coeffs.as_ref())?;
    let z = match activation {
        Activation::Relu => x.iter().map(|&v| relu(v)).collect(),
        Activation::Identity => x.clone(),
    };
    Ok((x, z))
}
