//! Valid 1-D convolution over the rows of a feature matrix, followed by
//! max-over-time pooling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{glorot_uniform, Matrix};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_WINDOWS: [usize; 3] = [2, 3, 4];
pub const DEFAULT_FILTERS: usize = 64;

/// Filters sharing one window height.
///
/// Each filter is stored as one row of `weights`, flattened row-major over
/// a `window × width` patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer<S> {
    pub window: usize,
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvFilterBank<S> {
    pub width: usize,
    pub layers: Vec<ConvLayer<S>>,
}

impl<S: Scalar> ConvFilterBank<S> {
    pub fn zeros(windows: &[usize], n_filters: usize, width: usize) -> Result<Self> {
        Self::build(windows, n_filters, width, |len, _| vec![S::zero(); len])
    }

    pub fn random<R: Rng + ?Sized>(windows: &[usize], n_filters: usize, width: usize, rng: &mut R) -> Result<Self> {
        Self::build(windows, n_filters, width, |len, window| {
            glorot_uniform(len, window * width, n_filters, rng)
        })
    }

    fn build(
        windows: &[usize],
        n_filters: usize,
        width: usize,
        mut init: impl FnMut(usize, usize) -> Vec<S>,
    ) -> Result<Self> {
        if windows.is_empty() || windows.contains(&0) {
            return Err(Error::Config(format!("window sizes must be ≥ 1, got {windows:?}")));
        }
        if n_filters == 0 || width == 0 {
            return Err(Error::Config("filter count and input width must be positive".into()));
        }
        let layers = windows
            .iter()
            .map(|&window| ConvLayer {
                window,
                weights: Matrix::from_vec(n_filters, window * width, init(n_filters * window * width, window)),
                bias: vec![S::zero(); n_filters],
            })
            .collect();
        Ok(Self { width, layers })
    }

    pub fn windows(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.window).collect()
    }

    pub fn max_window(&self) -> usize {
        self.layers.iter().map(|l| l.window).max().unwrap_or(0)
    }

    pub fn n_filters(&self) -> usize {
        self.layers.first().map_or(0, |l| l.bias.len())
    }

    /// Length of the pooled vector (windows × filters).
    pub fn pooled_len(&self) -> usize {
        self.layers.len() * self.n_filters()
    }
}

#[inline]
pub fn relu<S: Scalar>(x: S) -> S {
    x.max(S::zero())
}

fn check_input<S: Scalar>(m: &Matrix<S>, bank: &ConvFilterBank<S>) -> Result<()> {
    if m.cols() != bank.width {
        return Err(Error::shape(format!(
            "feature matrix has {} columns, filters expect {}",
            m.cols(),
            bank.width
        )));
    }
    if m.rows() < bank.max_window() {
        return Err(Error::shape(format!(
            "feature matrix has {} rows, shorter than window {}",
            m.rows(),
            bank.max_window()
        )));
    }
    Ok(())
}

/// Feature maps per window: a `filters × (rows − window + 1)` matrix each.
pub fn conv_encode<S: Scalar>(m: &Matrix<S>, bank: &ConvFilterBank<S>) -> Result<Vec<Matrix<S>>> {
    check_input(m, bank)?;
    let w = bank.width;
    Ok(bank
        .layers
        .iter()
        .map(|layer| {
            let positions = m.rows() - layer.window + 1;
            let mut q = Matrix::zeros(layer.bias.len(), positions);
            for f in 0..layer.bias.len() {
                let filter = layer.weights.row(f);
                for j in 0..positions {
                    let patch = &m.as_slice()[j * w..(j + layer.window) * w];
                    q.set(f, j, relu(layer.bias[f] + dot(filter, patch)));
                }
            }
            q
        })
        .collect())
}

/// One maximum per (window, filter) channel, window-major.
pub fn max_over_time<S: Scalar>(maps: &[Matrix<S>]) -> Result<Vec<S>> {
    let mut out = Vec::new();
    for q in maps {
        if q.cols() == 0 {
            return Err(Error::shape("cannot pool an empty feature map"));
        }
        for f in 0..q.rows() {
            out.push(q.row(f).iter().copied().fold(S::neg_infinity(), S::max));
        }
    }
    Ok(out)
}

/// Pooled emotion-channel block followed by the POS-channel block.
pub fn concat_pooled<S: Scalar>(emo: &[S], pos: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(emo.len() + pos.len());
    out.extend_from_slice(emo);
    out.extend_from_slice(pos);
    out
}

/// Pooled values plus the winning position of each channel.
///
/// `argmax` is `None` when the channel's maximum is a ReLU zero, so no
/// gradient flows back through it.
#[derive(Debug, Clone)]
pub(crate) struct PooledForward<S> {
    pub values: Vec<S>,
    pub argmax: Vec<Option<usize>>,
}

/// Fused convolution + pooling that remembers where each maximum came from.
pub(crate) fn conv_pool_forward<S: Scalar>(m: &Matrix<S>, bank: &ConvFilterBank<S>) -> Result<PooledForward<S>> {
    check_input(m, bank)?;
    let w = bank.width;
    let mut values = Vec::with_capacity(bank.pooled_len());
    let mut argmax = Vec::with_capacity(bank.pooled_len());
    for layer in &bank.layers {
        let positions = m.rows() - layer.window + 1;
        for f in 0..layer.bias.len() {
            let filter = layer.weights.row(f);
            let mut best = S::zero();
            let mut at = None;
            for j in 0..positions {
                let patch = &m.as_slice()[j * w..(j + layer.window) * w];
                let pre = layer.bias[f] + dot(filter, patch);
                if pre > best {
                    best = pre;
                    at = Some(j);
                }
            }
            values.push(best);
            argmax.push(at);
        }
    }
    Ok(PooledForward { values, argmax })
}

/// Accumulates filter gradients and returns `∂L/∂M` for the input matrix.
pub(crate) fn conv_pool_backward<S: Scalar>(
    m: &Matrix<S>,
    bank: &ConvFilterBank<S>,
    fwd: &PooledForward<S>,
    d_pooled: &[S],
    grad: &mut ConvFilterBank<S>,
) -> Matrix<S> {
    let w = bank.width;
    let mut d_m = Matrix::zeros(m.rows(), m.cols());
    let mut channel = 0;
    for (layer, g_layer) in bank.layers.iter().zip(grad.layers.iter_mut()) {
        for f in 0..layer.bias.len() {
            if let Some(j) = fwd.argmax[channel] {
                let g = d_pooled[channel];
                let span = j * w..(j + layer.window) * w;
                let patch = &m.as_slice()[span.clone()];
                for (gw, &x) in g_layer.weights.row_mut(f).iter_mut().zip(patch) {
                    *gw = *gw + g * x;
                }
                g_layer.bias[f] = g_layer.bias[f] + g;
                for (dx, &wv) in d_m.as_mut_slice()[span].iter_mut().zip(layer.weights.row(f)) {
                    *dx = *dx + g * wv;
                }
            }
            channel += 1;
        }
    }
    d_m
}
