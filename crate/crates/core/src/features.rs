//! Multi-channel word features.
//!
//! Every word `j` of a text gets an attention vector, a weighted sum of its
//! peers' context vectors. The weight on peer `y` averages two softmaxes
//! over `y ≠ j`: one over a learned relevance score
//! `W_a · tanh(W_z [c_j ; c_y])`, and one over the cosine similarity of the
//! two words' lexicon vectors. Rows of the two channel matrices are then
//!
//! ```text
//! M_emo[j] = attention_j ⊕ context_j ⊕ emotion_j
//! M_pos[j] = attention_j ⊕ context_j ⊕ pos_j
//! ```
//!
//! zero-padded to a fixed height.

use rand::Rng;

use crate::corpus::pad_or_truncate;
use crate::error::{Error, Result};
use crate::matrix::{glorot_uniform, Matrix};
use crate::resources::{emotion_vector, tag_tokens, Resources};
use crate::scalar::{dot, norm, softmax, Scalar};

pub const DEFAULT_ATTENTION_HIDDEN: usize = 64;

/// Parameters of the relevance score.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<S> {
    /// `hidden × 2d`; columns `..d` act on the word, `d..` on the peer.
    pub w_z: Matrix<S>,
    pub w_a: Vec<S>,
}

impl<S: Scalar> AttentionParams<S> {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            w_z: Matrix::zeros(hidden, 2 * dim),
            w_a: vec![S::zero(); hidden],
        }
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_z: Matrix::from_vec(hidden, 2 * dim, glorot_uniform(hidden * 2 * dim, 2 * dim, hidden, rng)),
            w_a: glorot_uniform(hidden, hidden, 1, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_z.cols() / 2
    }

    pub fn hidden(&self) -> usize {
        self.w_a.len()
    }

    /// `W_z[:, ..d] · c` and `W_z[:, d..] · c`.
    fn project(&self, c: &[S]) -> (Vec<S>, Vec<S>) {
        let d = self.dim();
        let mut own = Vec::with_capacity(self.hidden());
        let mut peer = Vec::with_capacity(self.hidden());
        for k in 0..self.hidden() {
            let row = self.w_z.row(k);
            own.push(dot(&row[..d], c));
            peer.push(dot(&row[d..], c));
        }
        (own, peer)
    }
}

/// Relevance score `W_a · tanh(W_z [cj ; cy])`.
pub fn pair_score<S: Scalar>(cj: &[S], cy: &[S], params: &AttentionParams<S>) -> Result<S> {
    let d = params.dim();
    if cj.len() != d || cy.len() != d {
        return Err(Error::shape(format!(
            "score expects two {d}-vectors, got {} and {}",
            cj.len(),
            cy.len()
        )));
    }
    let mut out = S::zero();
    for (k, &a) in params.w_a.iter().enumerate() {
        let row = params.w_z.row(k);
        let h = dot(&row[..d], cj) + dot(&row[d..], cy);
        out = out + a * h.tanh();
    }
    Ok(out)
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn emotion_similarity<S: Scalar>(a: &[S], b: &[S]) -> S {
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        return S::zero();
    }
    (dot(a, b) / (na * nb)).max(-S::one()).min(S::one())
}

/// Forward values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionForward<S> {
    /// `n × n` attention weights, zero diagonal.
    pub weights: Matrix<S>,
    /// `n × n` softmax of the learned scores.
    score_probs: Matrix<S>,
    /// `tanh` activations per ordered pair `(j, y)`, flattened `j * n + y`.
    activations: Vec<Vec<S>>,
}

/// Attention weights and the cached intermediates for one text.
pub fn attention_forward<S: Scalar>(
    contexts: &Matrix<S>,
    emotions: &Matrix<S>,
    params: &AttentionParams<S>,
) -> Result<AttentionForward<S>> {
    let n = contexts.rows();
    if contexts.cols() != params.dim() {
        return Err(Error::shape(format!(
            "context width {} does not match attention dim {}",
            contexts.cols(),
            params.dim()
        )));
    }
    if emotions.rows() != n {
        return Err(Error::shape("context and emotion rows differ"));
    }
    let mut weights = Matrix::zeros(n, n);
    let mut score_probs = Matrix::zeros(n, n);
    let mut activations = vec![Vec::new(); n * n];
    if n < 2 {
        return Ok(AttentionForward {
            weights,
            score_probs,
            activations,
        });
    }
    let projections: Vec<(Vec<S>, Vec<S>)> = (0..n).map(|j| params.project(contexts.row(j))).collect();
    let half = S::lit(0.5);
    for j in 0..n {
        let peers: Vec<usize> = (0..n).filter(|&y| y != j).collect();
        let mut scores = Vec::with_capacity(peers.len());
        for &y in &peers {
            let t: Vec<S> = projections[j]
                .0
                .iter()
                .zip(&projections[y].1)
                .map(|(&a, &b)| (a + b).tanh())
                .collect();
            scores.push(dot(&params.w_a, &t));
            activations[j * n + y] = t;
        }
        let sims: Vec<S> = peers
            .iter()
            .map(|&y| emotion_similarity(emotions.row(j), emotions.row(y)))
            .collect();
        let p = softmax(&scores);
        let r = softmax(&sims);
        for (i, &y) in peers.iter().enumerate() {
            score_probs.set(j, y, p[i]);
            weights.set(j, y, half * (p[i] + r[i]));
        }
    }
    Ok(AttentionForward {
        weights,
        score_probs,
        activations,
    })
}

/// `n × n` attention weights (rows sum to 1 for `n ≥ 2`; all zero for `n = 1`).
pub fn attention_weights<S: Scalar>(
    contexts: &Matrix<S>,
    emotions: &Matrix<S>,
    params: &AttentionParams<S>,
) -> Result<Matrix<S>> {
    attention_forward(contexts, emotions, params).map(|f| f.weights)
}

/// Weighted sum of the peers' context vectors for word `j`.
pub fn attention_vector<S: Scalar>(j: usize, weights: &Matrix<S>, contexts: &Matrix<S>) -> Vec<S> {
    let mut out = vec![S::zero(); contexts.cols()];
    for y in (0..contexts.rows()).filter(|&y| y != j) {
        let a = weights.get(j, y);
        for (o, &c) in out.iter_mut().zip(contexts.row(y)) {
            *o = *o + a * c;
        }
    }
    out
}

pub fn attention_vectors<S: Scalar>(weights: &Matrix<S>, contexts: &Matrix<S>) -> Matrix<S> {
    let rows: Vec<Vec<S>> = (0..contexts.rows())
        .map(|j| attention_vector(j, weights, contexts))
        .collect();
    if rows.is_empty() {
        return Matrix::zeros(0, contexts.cols());
    }
    Matrix::from_rows(&rows)
}

/// Accumulates parameter gradients given `d_att = ∂L/∂attention` (`n × d`).
pub fn attention_backward<S: Scalar>(
    fwd: &AttentionForward<S>,
    d_att: &Matrix<S>,
    contexts: &Matrix<S>,
    params: &AttentionParams<S>,
    grad: &mut AttentionParams<S>,
) {
    let n = contexts.rows();
    if n < 2 {
        return;
    }
    let d = params.dim();
    let h = params.hidden();
    let half = S::lit(0.5);
    // Σ_y ∂L/∂h_{j,y} for the word-side block, Σ_j for the peer-side block
    let mut dh_own = vec![vec![S::zero(); h]; n];
    let mut dh_peer = vec![vec![S::zero(); h]; n];
    for j in 0..n {
        let g = d_att.row(j);
        let dp: Vec<(usize, S)> = (0..n)
            .filter(|&y| y != j)
            .map(|y| (y, half * dot(g, contexts.row(y))))
            .collect();
        let mean: S = dp.iter().map(|&(y, v)| fwd.score_probs.get(j, y) * v).sum();
        for &(y, v) in &dp {
            let ds = fwd.score_probs.get(j, y) * (v - mean);
            let t = &fwd.activations[j * n + y];
            for k in 0..h {
                grad.w_a[k] = grad.w_a[k] + ds * t[k];
                let dh = ds * params.w_a[k] * (S::one() - t[k] * t[k]);
                dh_own[j][k] = dh_own[j][k] + dh;
                dh_peer[y][k] = dh_peer[y][k] + dh;
            }
        }
    }
    for j in 0..n {
        let c = contexts.row(j);
        for k in 0..h {
            let row = grad.w_z.row_mut(k);
            let (a, b) = (dh_own[j][k], dh_peer[j][k]);
            for i in 0..d {
                row[i] = row[i] + a * c[i];
                row[d + i] = row[d + i] + b * c[i];
            }
        }
    }
}

/// Static per-word inputs of one text (rows = words kept after truncation).
#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatures<S> {
    pub contexts: Matrix<S>,
    pub emotions: Matrix<S>,
    pub pos: Matrix<S>,
}

impl<S: Scalar> WordFeatures<S> {
    pub fn len(&self) -> usize {
        self.contexts.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.rows() == 0
    }
}

/// Looks up context, lexicon and POS vectors for the first `gamma` tokens.
pub fn word_features<S: Scalar>(
    tokens: &[String],
    tags: Option<&[String]>,
    gamma: usize,
    resources: &Resources<S>,
) -> WordFeatures<S> {
    let all_tags = tag_tokens(tokens, tags);
    let n = tokens.len().min(gamma);
    let kept = pad_or_truncate(tokens, n);
    let d = resources.dim();
    let e = resources.emotion_width();
    let mu = resources.pos_width();
    let mut contexts = Matrix::zeros(n, d);
    let mut emotions = Matrix::zeros(n, e);
    let mut pos = Matrix::zeros(n, mu);
    for (j, word) in kept.iter().enumerate() {
        contexts.row_mut(j).copy_from_slice(resources.embeddings.lookup(word));
        emotions
            .row_mut(j)
            .copy_from_slice(&emotion_vector(word, &resources.lexicons));
        pos.row_mut(j)
            .copy_from_slice(&resources.tagset.pos_vector::<S>(&all_tags[j]));
    }
    WordFeatures {
        contexts,
        emotions,
        pos,
    }
}

/// The padded pair `(M_emo, M_pos)` for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelMatrices<S> {
    pub m_emo: Matrix<S>,
    pub m_pos: Matrix<S>,
    pub true_length: usize,
}

/// Stacks `attention ⊕ context ⊕ emotion|pos` rows and zero-pads to `rows`.
pub fn assemble_matrices<S: Scalar>(
    words: &WordFeatures<S>,
    attention: &Matrix<S>,
    rows: usize,
) -> MultiChannelMatrices<S> {
    let n = words.len().min(rows);
    let d = words.contexts.cols();
    let e = words.emotions.cols();
    let mu = words.pos.cols();
    let mut m_emo = Matrix::zeros(rows, 2 * d + e);
    let mut m_pos = Matrix::zeros(rows, 2 * d + mu);
    for j in 0..n {
        let re = m_emo.row_mut(j);
        re[..d].copy_from_slice(attention.row(j));
        re[d..2 * d].copy_from_slice(words.contexts.row(j));
        re[2 * d..].copy_from_slice(words.emotions.row(j));
        let rp = m_pos.row_mut(j);
        rp[..d].copy_from_slice(attention.row(j));
        rp[d..2 * d].copy_from_slice(words.contexts.row(j));
        rp[2 * d..].copy_from_slice(words.pos.row(j));
    }
    MultiChannelMatrices {
        m_emo,
        m_pos,
        true_length: n,
    }
}

/// Builds both channel matrices for a token list, padded/truncated to `gamma`.
pub fn build_matrices<S: Scalar>(
    tokens: &[String],
    tags: Option<&[String]>,
    gamma: usize,
    resources: &Resources<S>,
    params: &AttentionParams<S>,
) -> Result<MultiChannelMatrices<S>> {
    if gamma == 0 {
        return Err(Error::Config("matrix height must be at least 1".into()));
    }
    let words = word_features(tokens, tags, gamma, resources);
    let weights = attention_weights(&words.contexts, &words.emotions, params)?;
    let att = attention_vectors(&weights, &words.contexts);
    Ok(assemble_matrices(&words, &att, gamma))
}
