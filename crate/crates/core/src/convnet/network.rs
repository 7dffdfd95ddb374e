//! The multi-task emotion network.
//!
//! Attention-augmented feature matrices feed two convolutional channels
//! (emotion and POS); their pooled outputs are concatenated and passed
//! through a dense stack ending in one sigmoid unit per emotion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convnet::adam::{adam_step, AdamState};
use crate::convnet::conv::{
    conv_pool_backward, conv_pool_forward, ConvFilterBank, PooledForward, DEFAULT_FILTERS, DEFAULT_WINDOWS,
};
use crate::convnet::dense::{affine, DenseLayer, DEFAULT_HIDDEN};
use crate::convnet::loss::{sample_bce, sigmoid_head};
use crate::convnet::regularizer::{coefficient_mask, RegularizerConfig};
use crate::error::{Error, Result};
use crate::features::{
    assemble_matrices, attention_backward, attention_forward, attention_vectors, AttentionForward, AttentionParams,
    MultiChannelMatrices, WordFeatures, DEFAULT_ATTENTION_HIDDEN,
};
use crate::matrix::Matrix;
use crate::persist::{read_f64s, read_json, split_sizes, write_f64s, write_json};
use crate::scalar::Scalar;

/// Samples per gradient work unit; partial sums are added in chunk order so
/// results do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkHyper {
    pub windows: Vec<usize>,
    pub n_filters: usize,
    /// Hidden dense widths; the output layer is added automatically.
    pub hidden: Vec<usize>,
    pub attention_hidden: usize,
    pub regularizer: RegularizerConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetworkHyper {
    fn default() -> Self {
        Self {
            windows: DEFAULT_WINDOWS.to_vec(),
            n_filters: DEFAULT_FILTERS,
            hidden: DEFAULT_HIDDEN.to_vec(),
            attention_hidden: DEFAULT_ATTENTION_HIDDEN,
            regularizer: RegularizerConfig::nsw_default(),
            learning_rate: 1e-6,
            batch_size: 128,
            epochs: 50,
            seed: 0,
        }
    }
}

/// Input geometry shared by every text a network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    /// Padded matrix height.
    pub rows: usize,
    /// Context embedding width.
    pub dim: usize,
    pub emotion_width: usize,
    pub pos_width: usize,
    /// Number of emotion outputs.
    pub labels: usize,
}

impl InputShape {
    pub fn emotion_channel_width(&self) -> usize {
        2 * self.dim + self.emotion_width
    }

    pub fn pos_channel_width(&self) -> usize {
        2 * self.dim + self.pos_width
    }
}

/// All trainable tensors. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S> {
    pub attention: AttentionParams<S>,
    pub emo_bank: ConvFilterBank<S>,
    pub pos_bank: ConvFilterBank<S>,
    pub dense: Vec<DenseLayer<S>>,
}

fn dense_widths(shape: &InputShape, hyper: &NetworkHyper) -> Vec<usize> {
    let pooled = 2 * hyper.windows.len() * hyper.n_filters;
    let mut widths = vec![pooled];
    widths.extend(&hyper.hidden);
    widths.push(shape.labels);
    widths
}

impl<S: Scalar> Params<S> {
    pub fn zeros(shape: &InputShape, hyper: &NetworkHyper) -> Result<Self> {
        let widths = dense_widths(shape, hyper);
        Ok(Self {
            attention: AttentionParams::zeros(shape.dim, hyper.attention_hidden),
            emo_bank: ConvFilterBank::zeros(&hyper.windows, hyper.n_filters, shape.emotion_channel_width())?,
            pos_bank: ConvFilterBank::zeros(&hyper.windows, hyper.n_filters, shape.pos_channel_width())?,
            dense: widths.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn random(shape: &InputShape, hyper: &NetworkHyper, rng: &mut ChaCha8Rng) -> Result<Self> {
        let widths = dense_widths(shape, hyper);
        let attention = AttentionParams::random(shape.dim, hyper.attention_hidden, rng);
        let emo_bank = ConvFilterBank::random(&hyper.windows, hyper.n_filters, shape.emotion_channel_width(), rng)?;
        let pos_bank = ConvFilterBank::random(&hyper.windows, hyper.n_filters, shape.pos_channel_width(), rng)?;
        let dense = widths.windows(2).map(|w| DenseLayer::random(w[0], w[1], rng)).collect();
        Ok(Self {
            attention,
            emo_bank,
            pos_bank,
            dense,
        })
    }

    /// Named tensors in persistence order with their shapes.
    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mut specs = vec![
            TensorSpec::new("attention.w_z", &[self.attention.w_z.rows(), self.attention.w_z.cols()]),
            TensorSpec::new("attention.w_a", &[self.attention.w_a.len()]),
        ];
        for (channel, bank) in [("emo", &self.emo_bank), ("pos", &self.pos_bank)] {
            for layer in &bank.layers {
                let w = &layer.weights;
                specs.push(TensorSpec::new(
                    &format!("conv.{channel}.{}.weights", layer.window),
                    &[w.rows(), layer.window, bank.width],
                ));
                specs.push(TensorSpec::new(&format!("conv.{channel}.{}.bias", layer.window), &[layer.bias.len()]));
            }
        }
        for (i, layer) in self.dense.iter().enumerate() {
            specs.push(TensorSpec::new(
                &format!("dense.{i}.weights"),
                &[layer.weights.rows(), layer.weights.cols()],
            ));
            specs.push(TensorSpec::new(&format!("dense.{i}.bias"), &[layer.bias.len()]));
        }
        specs
    }

    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = vec![self.attention.w_z.as_slice(), &self.attention.w_a];
        for bank in [&self.emo_bank, &self.pos_bank] {
            for layer in &bank.layers {
                out.push(layer.weights.as_slice());
                out.push(&layer.bias);
            }
        }
        for layer in &self.dense {
            out.push(layer.weights.as_slice());
            out.push(&layer.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let Self {
            attention,
            emo_bank,
            pos_bank,
            dense,
        } = self;
        let mut out: Vec<&mut [S]> = vec![attention.w_z.as_mut_slice(), &mut attention.w_a];
        for bank in [emo_bank, pos_bank] {
            for layer in &mut bank.layers {
                out.push(layer.weights.as_mut_slice());
                out.push(&mut layer.bias);
            }
        }
        for layer in dense {
            out.push(layer.weights.as_mut_slice());
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    fn new(name: &str, shape: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Regularizer coefficients for each dense layer during one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCoefficients<S>(pub Vec<Option<Matrix<S>>>);

impl<S> LayerCoefficients<S> {
    /// Raw weights on every layer.
    pub fn identity(layers: usize) -> Self {
        Self((0..layers).map(|_| None).collect())
    }
}

/// One labelled text.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a, S> {
    pub words: &'a WordFeatures<S>,
    pub labels: &'a [bool],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

struct SampleForward<S> {
    attention: AttentionForward<S>,
    matrices: MultiChannelMatrices<S>,
    emo_pool: PooledForward<S>,
    pos_pool: PooledForward<S>,
    /// Input to each dense layer; the first is the pooled vector.
    layer_inputs: Vec<Vec<S>>,
    probs: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    pub shape: InputShape,
    pub hyper: NetworkHyper,
    pub params: Params<S>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkManifest {
    scalar: String,
    shape: InputShape,
    hyper: NetworkHyper,
    tensors: Vec<TensorSpec>,
}

impl<S: Scalar> Network<S> {
    /// Glorot-initialised network seeded from `hyper.seed`.
    pub fn new(shape: InputShape, hyper: NetworkHyper) -> Result<Self> {
        Self::check_config(&shape, &hyper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let params = Params::random(&shape, &hyper, &mut rng)?;
        Ok(Self { shape, hyper, params })
    }

    fn check_config(shape: &InputShape, hyper: &NetworkHyper) -> Result<()> {
        let max_window = hyper.windows.iter().copied().max().unwrap_or(0);
        if shape.rows < max_window {
            return Err(Error::shape(format!(
                "matrix height {} is below the largest window {max_window}",
                shape.rows
            )));
        }
        if shape.labels == 0 || shape.dim == 0 {
            return Err(Error::Config("network needs at least one label and a positive embedding width".into()));
        }
        if hyper.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if hyper.hidden.contains(&0) || hyper.attention_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be a positive number".into()));
        }
        let sizes: Vec<usize> = dense_widths(shape, hyper).windows(2).map(|w| w[0] * w[1]).collect();
        hyper.regularizer.validate(&sizes)
    }

    fn check_words(&self, words: &WordFeatures<S>) -> Result<()> {
        let s = &self.shape;
        if words.contexts.cols() != s.dim || words.emotions.cols() != s.emotion_width || words.pos.cols() != s.pos_width {
            return Err(Error::shape(format!(
                "word features are {}/{}/{} wide, network expects {}/{}/{}",
                words.contexts.cols(),
                words.emotions.cols(),
                words.pos.cols(),
                s.dim,
                s.emotion_width,
                s.pos_width
            )));
        }
        if words.len() > s.rows {
            return Err(Error::shape(format!(
                "text has {} words, network takes at most {}",
                words.len(),
                s.rows
            )));
        }
        Ok(())
    }

    /// The padded channel matrices this network builds for a text.
    pub fn matrices(&self, words: &WordFeatures<S>) -> Result<MultiChannelMatrices<S>> {
        self.check_words(words)?;
        let fwd = attention_forward(&words.contexts, &words.emotions, &self.params.attention)?;
        let att = attention_vectors(&fwd.weights, &words.contexts);
        Ok(assemble_matrices(words, &att, self.shape.rows))
    }

    fn forward(&self, words: &WordFeatures<S>, coeffs: &LayerCoefficients<S>) -> Result<SampleForward<S>> {
        self.check_words(words)?;
        let attention = attention_forward(&words.contexts, &words.emotions, &self.params.attention)?;
        let att = attention_vectors(&attention.weights, &words.contexts);
        let matrices = assemble_matrices(words, &att, self.shape.rows);
        let emo_pool = conv_pool_forward(&matrices.m_emo, &self.params.emo_bank)?;
        let pos_pool = conv_pool_forward(&matrices.m_pos, &self.params.pos_bank)?;
        let mut z = emo_pool.values.clone();
        z.extend_from_slice(&pos_pool.values);
        let last = self.params.dense.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.params.dense.len());
        for (l, layer) in self.params.dense.iter().enumerate() {
            let x = affine(&z, layer, coeffs.0[l].as_ref())?;
            layer_inputs.push(z);
            z = if l == last {
                x
            } else {
                x.into_iter().map(|v| v.max(S::zero())).collect()
            };
        }
        Ok(SampleForward {
            attention,
            matrices,
            emo_pool,
            pos_pool,
            layer_inputs,
            probs: sigmoid_head(&z),
        })
    }

    fn backward(
        &self,
        words: &WordFeatures<S>,
        fwd: &SampleForward<S>,
        d_out: Vec<S>,
        coeffs: &LayerCoefficients<S>,
        grad: &mut Params<S>,
    ) {
        let mut dx = d_out;
        let mut d_pooled = Vec::new();
        for l in (0..self.params.dense.len()).rev() {
            let layer = &self.params.dense[l];
            let coeff = coeffs.0[l].as_ref();
            let z = &fwd.layer_inputs[l];
            let g = &mut grad.dense[l];
            let mut dz = vec![S::zero(); z.len()];
            for (k, &d) in dx.iter().enumerate() {
                g.bias[k] = g.bias[k] + d;
                let w = layer.weights.row(k);
                let gw = g.weights.row_mut(k);
                for i in 0..z.len() {
                    let c = coeff.map_or(S::one(), |c| c.get(k, i));
                    gw[i] = gw[i] + c * d * z[i];
                    dz[i] = dz[i] + c * w[i] * d;
                }
            }
            if l == 0 {
                d_pooled = dz;
            } else {
                dx = dz
                    .into_iter()
                    .zip(z)
                    .map(|(d, &a)| if a > S::zero() { d } else { S::zero() })
                    .collect();
            }
        }
        let split = self.params.emo_bank.pooled_len();
        let d_emo = conv_pool_backward(
            &fwd.matrices.m_emo,
            &self.params.emo_bank,
            &fwd.emo_pool,
            &d_pooled[..split],
            &mut grad.emo_bank,
        );
        let d_pos = conv_pool_backward(
            &fwd.matrices.m_pos,
            &self.params.pos_bank,
            &fwd.pos_pool,
            &d_pooled[split..],
            &mut grad.pos_bank,
        );
        let n = fwd.matrices.true_length;
        let d = self.shape.dim;
        let mut d_att = Matrix::zeros(n, d);
        for j in 0..n {
            let (e, p) = (d_emo.row(j), d_pos.row(j));
            for (i, v) in d_att.row_mut(j).iter_mut().enumerate() {
                *v = e[i] + p[i];
            }
        }
        attention_backward(
            &fwd.attention,
            &d_att,
            &words.contexts,
            &self.params.attention,
            &mut grad.attention,
        );
    }

    /// Per-emotion probabilities using the raw weights.
    pub fn predict_proba(&self, words: &WordFeatures<S>) -> Result<Vec<S>> {
        let coeffs = LayerCoefficients::identity(self.params.dense.len());
        Ok(self.forward(words, &coeffs)?.probs)
    }

    /// Fresh regularizer coefficients for one training step.
    pub fn draw_coefficients(&self, rng: &mut ChaCha8Rng) -> Result<LayerCoefficients<S>> {
        self.params
            .dense
            .iter()
            .map(|l| coefficient_mask(&l.weights, &self.hyper.regularizer, rng))
            .collect::<Result<Vec<_>>>()
            .map(LayerCoefficients)
    }

    fn check_labels(&self, batch: &[Example<'_, S>]) -> Result<()> {
        match batch.iter().find(|e| e.labels.len() != self.shape.labels) {
            Some(e) => Err(Error::shape(format!(
                "example has {} labels, network predicts {}",
                e.labels.len(),
                self.shape.labels
            ))),
            None => Ok(()),
        }
    }

    /// Mean summed cross-entropy over `batch` under fixed coefficients.
    pub fn loss(&self, batch: &[Example<'_, S>], coeffs: &LayerCoefficients<S>) -> Result<S> {
        self.check_labels(batch)?;
        if batch.is_empty() {
            return Ok(S::zero());
        }
        let total = batch
            .iter()
            .map(|e| Ok(sample_bce(&self.forward(e.words, coeffs)?.probs, e.labels)))
            .sum::<Result<S>>()?;
        Ok(total / S::lit(batch.len() as f64))
    }

    /// Loss with raw weights, as seen at inference.
    pub fn mean_loss(&self, batch: &[Example<'_, S>]) -> Result<S> {
        self.loss(batch, &LayerCoefficients::identity(self.params.dense.len()))
    }

    /// Loss and its gradient with the coefficients held constant.
    pub fn loss_and_gradient(
        &self,
        batch: &[Example<'_, S>],
        coeffs: &LayerCoefficients<S>,
    ) -> Result<(S, Params<S>)> {
        self.check_labels(batch)?;
        let mut grad = Params::zeros(&self.shape, &self.hyper)?;
        if batch.is_empty() {
            return Ok((S::zero(), grad));
        }
        let scale = S::one() / S::lit(batch.len() as f64);
        let partials = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| -> Result<(S, Params<S>)> {
                let mut g = Params::zeros(&self.shape, &self.hyper)?;
                let mut loss = S::zero();
                for e in chunk {
                    let fwd = self.forward(e.words, coeffs)?;
                    loss = loss + sample_bce(&fwd.probs, e.labels);
                    let d_out = fwd
                        .probs
                        .iter()
                        .zip(e.labels)
                        .map(|(&p, &t)| (p - if t { S::one() } else { S::zero() }) * scale)
                        .collect();
                    self.backward(e.words, &fwd, d_out, coeffs, &mut g);
                }
                Ok((loss, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut loss = S::zero();
        for (l, g) in &partials {
            loss = loss + *l;
            grad.add_assign(g);
        }
        Ok((loss * scale, grad))
    }

    /// Mini-batch Adam training; returns the mean training loss per epoch.
    pub fn train(&mut self, examples: &[Example<'_, S>]) -> Result<TrainReport> {
        if examples.is_empty() {
            return Err(Error::Train("no training examples".into()));
        }
        self.check_labels(examples)?;
        for e in examples {
            self.check_words(e.words)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.hyper.seed.wrapping_add(1));
        let sizes: Vec<usize> = self.params.tensors().iter().map(|t| t.len()).collect();
        let mut adam = AdamState::new(self.hyper.learning_rate, &sizes);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut epoch_losses = Vec::with_capacity(self.hyper.epochs);
        for epoch in 0..self.hyper.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for idx in order.chunks(self.hyper.batch_size) {
                let batch: Vec<Example<'_, S>> = idx.iter().map(|&i| examples[i]).collect();
                let coeffs = self.draw_coefficients(&mut rng)?;
                let (loss, grad) = self.loss_and_gradient(&batch, &coeffs)?;
                if !loss.is_finite() {
                    return Err(Error::Train(format!("loss diverged in epoch {}", epoch + 1)));
                }
                total += loss.as_f64() * batch.len() as f64;
                let grads = grad.tensors();
                adam_step(&mut self.params.tensors_mut(), &grads, &mut adam)?;
            }
            let mean = total / examples.len() as f64;
            log::debug!("epoch {}: loss {mean:.6}", epoch + 1);
            epoch_losses.push(mean);
        }
        Ok(TrainReport { epoch_losses })
    }

    /// Writes `<stem>.json` (shapes and settings) and `<stem>.bin` (tensors).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let manifest = NetworkManifest {
            scalar: S::type_name().to_string(),
            shape: self.shape,
            hyper: self.hyper.clone(),
            tensors: self.params.tensor_specs(),
        };
        write_json(&dir.join(format!("{stem}.json")), &manifest)?;
        write_f64s(
            &dir.join(format!("{stem}.bin")),
            self.params.tensors().into_iter().flatten().copied(),
        )
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let manifest: NetworkManifest = read_json(&dir.join(format!("{stem}.json")))?;
        Self::check_config(&manifest.shape, &manifest.hyper)?;
        let mut params = Params::zeros(&manifest.shape, &manifest.hyper)?;
        if params.tensor_specs() != manifest.tensors {
            return Err(Error::Format(format!("{stem}: tensor list does not match the network layout")));
        }
        let flat: Vec<S> = read_f64s(&dir.join(format!("{stem}.bin")))?;
        let sizes: Vec<usize> = manifest.tensors.iter().map(TensorSpec::len).collect();
        for (dst, src) in params.tensors_mut().into_iter().zip(split_sizes(&flat, &sizes)?) {
            dst.copy_from_slice(&src);
        }
        Ok(Self {
            shape: manifest.shape,
            hyper: manifest.hyper,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_shape() -> InputShape {
        InputShape {
            rows: 4,
            dim: 3,
            emotion_width: 2,
            pos_width: 3,
            labels: 2,
        }
    }

    fn tiny_hyper(regularizer: RegularizerConfig, seed: u64) -> NetworkHyper {
        NetworkHyper {
            windows: vec![1, 2],
            n_filters: 3,
            hidden: vec![4],
            attention_hidden: 3,
            regularizer,
            learning_rate: 1e-2,
            batch_size: 4,
            epochs: 5,
            seed,
        }
    }

    fn random_words(n: usize, shape: &InputShape, rng: &mut ChaCha8Rng) -> WordFeatures<f64> {
        let mut gen = |r: usize, c: usize| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let contexts = gen(n, shape.dim);
        let emotions = gen(n, shape.emotion_width);
        let mut pos = Matrix::zeros(n, shape.pos_width);
        for j in 0..n {
            pos.set(j, j % shape.pos_width, 1.0);
        }
        WordFeatures {
            contexts,
            emotions,
            pos,
        }
    }

    fn gradient_check(reg: RegularizerConfig, seed: u64) {
        let shape = tiny_shape();
        let mut net = Network::<f64>::new(shape, tiny_hyper(reg, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        // zero biases put padding rows exactly on the ReLU kink
        for t in net.params.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
        let words: Vec<WordFeatures<f64>> = (0..3).map(|i| random_words(2 + i, &shape, &mut rng)).collect();
        let labels = [vec![true, false], vec![false, false], vec![true, true]];
        let batch: Vec<Example<'_, f64>> = words
            .iter()
            .zip(&labels)
            .map(|(w, l)| Example { words: w, labels: l })
            .collect();
        let coeffs = net.draw_coefficients(&mut rng).unwrap();
        let (_, grad) = net.loss_and_gradient(&batch, &coeffs).unwrap();
        let analytic: Vec<f64> = grad.tensors().concat();
        let h = 1e-6;
        let mut idx = 0;
        for t in 0..net.params.tensors().len() {
            for i in 0..net.params.tensors()[t].len() {
                let mut probe = net.clone();
                probe.params.tensors_mut()[t][i] += h;
                let plus = probe.loss(&batch, &coeffs).unwrap();
                probe.params.tensors_mut()[t][i] -= 2.0 * h;
                let minus = probe.loss(&batch, &coeffs).unwrap();
                let numeric = (plus - minus) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "{reg} tensor {t} entry {i}: {a} vs {numeric}");
                idx += 1;
            }
        }
        assert!(grad.attention.w_a.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        gradient_check(RegularizerConfig::None, 1);
        gradient_check(RegularizerConfig::nsw_default(), 2);
        gradient_check(RegularizerConfig::DropConnect { rate: 3 }, 3);
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradient() {
        let shape = tiny_shape();
        let net = Network::<f64>::new(shape, tiny_hyper(RegularizerConfig::None, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let words: Vec<_> = (0..3).map(|_| random_words(3, &shape, &mut rng)).collect();
        let labels = vec![true, false];
        let batch: Vec<Example<'_, f64>> = words.iter().map(|w| Example { words: w, labels: &labels }).collect();
        let doubled: Vec<_> = batch.iter().chain(&batch).copied().collect();
        let coeffs = LayerCoefficients::identity(2);
        let (l1, g1) = net.loss_and_gradient(&batch, &coeffs).unwrap();
        let (l2, g2) = net.loss_and_gradient(&doubled, &coeffs).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.tensors().concat().iter().zip(g2.tensors().concat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Word 0 of each text signals its labels through its context vector.
    fn separable_toy(n: usize, shape: &InputShape) -> (Vec<WordFeatures<f64>>, Vec<Vec<bool>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut words = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let a = i % 2 == 0;
            let b = (i / 2) % 2 == 0;
            let mut w = random_words(3, shape, &mut rng);
            for v in w.contexts.as_mut_slice() {
                *v *= 0.1;
            }
            w.contexts.set(0, 0, if a { 1.0 } else { -1.0 });
            w.contexts.set(1, 1, if b { 1.0 } else { -1.0 });
            words.push(w);
            labels.push(vec![a, b]);
        }
        (words, labels)
    }

    #[test]
    fn loss_falls_on_separable_toy() {
        let shape = tiny_shape();
        let mut hyper = tiny_hyper(RegularizerConfig::nsw_default(), 6);
        hyper.n_filters = 8;
        hyper.hidden = vec![16];
        hyper.epochs = 50;
        let (words, labels) = separable_toy(32, &shape);
        let examples: Vec<Example<'_, f64>> = words
            .iter()
            .zip(&labels)
            .map(|(w, l)| Example { words: w, labels: l })
            .collect();
        let mut net = Network::<f64>::new(shape, hyper).unwrap();
        let initial = net.mean_loss(&examples).unwrap();
        net.train(&examples).unwrap();
        let last = net.mean_loss(&examples).unwrap();
        assert!(last < 0.1 * initial, "{initial} -> {last}");
    }

    #[test]
    fn training_is_deterministic_and_persists() {
        let shape = tiny_shape();
        let (words, labels) = separable_toy(12, &shape);
        let examples: Vec<Example<'_, f64>> = words
            .iter()
            .zip(&labels)
            .map(|(w, l)| Example { words: w, labels: l })
            .collect();
        let train = || {
            let mut net = Network::<f64>::new(shape, tiny_hyper(RegularizerConfig::DropConnect { rate: 2 }, 8)).unwrap();
            let report = net.train(&examples).unwrap();
            (net, report)
        };
        let (a, ra) = train();
        let (b, rb) = train();
        assert_eq!(a, b);
        assert_eq!(ra, rb);

        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path(), "net").unwrap();
        let back = Network::<f64>::load(dir.path(), "net").unwrap();
        assert_eq!(back, a);
        assert_eq!(back.predict_proba(&words[0]).unwrap(), a.predict_proba(&words[0]).unwrap());
    }

    #[test]
    fn rejects_bad_configs_and_inputs() {
        let shape = tiny_shape();
        let mut hyper = tiny_hyper(RegularizerConfig::None, 0);
        hyper.windows = vec![5];
        assert!(matches!(Network::<f64>::new(shape, hyper), Err(Error::Shape(_))));
        let hyper = tiny_hyper(RegularizerConfig::DropConnect { rate: 1000 }, 0);
        assert!(matches!(Network::<f64>::new(shape, hyper), Err(Error::Config(_))));
        let net = Network::<f64>::new(shape, tiny_hyper(RegularizerConfig::None, 0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let too_long = random_words(5, &shape, &mut rng);
        assert!(matches!(net.predict_proba(&too_long), Err(Error::Shape(_))));
    }

    #[test]
    fn f32_network_runs() {
        let shape = tiny_shape();
        let net = Network::<f32>::new(shape, tiny_hyper(RegularizerConfig::nsw_default(), 3)).unwrap();
        let words = WordFeatures {
            contexts: Matrix::from_rows(&[vec![0.1f32, 0.2, 0.3], vec![-0.4, 0.5, 0.0]]),
            emotions: Matrix::from_rows(&[vec![1.0f32, 0.0], vec![0.0, 1.0]]),
            pos: Matrix::from_rows(&[vec![1.0f32, 0.0, 0.0], vec![0.0, 1.0, 0.0]]),
        };
        let p = net.predict_proba(&words).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
