//! Cognitive factor inference with one linear ε-insensitive support vector
//! regressor per factor.
//!
//! Training minimizes the primal objective
//!
//! ```text
//! J(w, b) = ½‖w‖² + C Σ max(0, |w·x + b − y| − ε)
//! ```
//!
//! by subgradient descent on `J / (C n)` (same minimizer, step size
//! independent of `n` and `C`), keeping the best iterate seen. The dual
//! stationarity conditions `w = Σ (α*ᵢ − αᵢ) xᵢ`, `Σ (α*ᵢ − αᵢ) = 0` are
//! what the tests check the result against.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CognitiveVector, LabeledDataset, ShortText, PAD};
use crate::error::{Error, Result};
use crate::persist;
use crate::resources::EmbeddingTable;
use crate::scalar::{dot, Scalar};

const MINI_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrHyper {
    /// Slack penalty C.
    pub c: f64,
    /// Tube half-width ε.
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for SvrHyper {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            steps: 5000,
            step_size: 1e-3,
            seed: 0,
        }
    }
}

/// Term → column index plus smoothed inverse document frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfVocabulary {
    pub terms: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
}

impl TfIdfVocabulary {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0usize;
        for doc in docs {
            n_docs += 1;
            let mut uniq: Vec<&String> = doc.iter().filter(|t| t.as_str() != PAD).collect();
            uniq.sort();
            uniq.dedup();
            for t in uniq {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let mut terms = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            terms.insert(term, i);
            idf.push(((1.0 + n_docs as f64) / (1.0 + count as f64)).ln() + 1.0);
        }
        Self { terms, idf }
    }
}

/// How a text becomes the regressor input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvrFeaturizer {
    /// Mean of the in-vocabulary context embeddings.
    MeanEmbedding,
    /// L2-normalized unigram TF-IDF.
    TfIdf(TfIdfVocabulary),
}

impl SvrFeaturizer {
    pub fn dim<S: Scalar>(&self, table: &EmbeddingTable<S>) -> usize {
        match self {
            SvrFeaturizer::MeanEmbedding => table.dim(),
            SvrFeaturizer::TfIdf(v) => v.idf.len(),
        }
    }

    pub fn featurize<S: Scalar>(&self, tokens: &[String], table: &EmbeddingTable<S>) -> Vec<S> {
        match self {
            SvrFeaturizer::MeanEmbedding => {
                let mut acc = vec![S::zero(); table.dim()];
                let mut known = 0usize;
                for t in tokens.iter().filter(|t| table.contains(t)) {
                    for (a, &v) in acc.iter_mut().zip(table.lookup(t)) {
                        *a = *a + v;
                    }
                    known += 1;
                }
                if known > 0 {
                    let n = S::lit(known as f64);
                    acc.iter_mut().for_each(|a| *a = *a / n);
                }
                acc
            }
            SvrFeaturizer::TfIdf(vocab) => {
                let mut acc = vec![0.0f64; vocab.idf.len()];
                let words: Vec<&String> = tokens.iter().filter(|t| t.as_str() != PAD).collect();
                for t in &words {
                    if let Some(&i) = vocab.terms.get(t.as_str()) {
                        acc[i] += 1.0 / words.len() as f64;
                    }
                }
                for (a, idf) in acc.iter_mut().zip(&vocab.idf) {
                    *a *= idf;
                }
                let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
                acc.into_iter()
                    .map(|a| S::lit(if norm > 0.0 { a / norm } else { 0.0 }))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel<S> {
    /// Zero-based factor index.
    pub factor_index: usize,
    pub w: Vec<S>,
    pub b: S,
    pub hyper: SvrHyper,
    pub trained: bool,
}

impl<S: Scalar> SvrModel<S> {
    /// Untrained model with fixed parameters (useful for constant models).
    pub fn with_params(factor_index: usize, w: Vec<S>, b: S) -> Self {
        Self {
            factor_index,
            w,
            b,
            hyper: SvrHyper::default(),
            trained: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w·x + b`.
    pub fn predict(&self, x: &[S]) -> Result<S> {
        predict_factor(self, x)
    }
}

pub fn predict_factor<S: Scalar>(model: &SvrModel<S>, x: &[S]) -> Result<S> {
    if x.len() != model.w.len() {
        return Err(Error::shape(format!(
            "regressor expects {} features, got {}",
            model.w.len(),
            x.len()
        )));
    }
    Ok(dot(&model.w, x) + model.b)
}

/// Primal objective `½‖w‖² + C Σ max(0, |w·x+b−y| − ε)`.
pub fn svr_objective<S: Scalar>(w: &[S], b: S, xs: &[Vec<S>], ys: &[S], c: S, epsilon: S) -> S {
    let slack: S = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| ((dot(w, x) + b - y).abs() - epsilon).max(S::zero()))
        .sum();
    S::lit(0.5) * dot(w, w) + c * slack
}

fn median<S: Scalar>(values: &[S]) -> S {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite targets"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / S::lit(2.0)
    }
}

/// Fits one regressor on feature rows `xs` and targets `ys`.
pub fn fit_svr<S: Scalar>(
    xs: &[Vec<S>],
    ys: &[S],
    factor_index: usize,
    hyper: SvrHyper,
) -> Result<SvrModel<S>> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Train(format!(
            "need matching non-empty features and targets, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if !(hyper.c > 0.0) || !(hyper.epsilon >= 0.0) || !(hyper.step_size > 0.0) {
        return Err(Error::Config(format!("invalid regressor hyperparameters {hyper:?}")));
    }
    let dim = xs[0].len();
    if xs.iter().any(|x| x.len() != dim) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Train("ragged features or non-finite targets".into()));
    }
    let n = xs.len();
    let c = S::lit(hyper.c);
    let eps = S::lit(hyper.epsilon);
    let objective = |w: &[S], b: S| svr_objective(w, b, xs, ys, c, eps);

    // start from the better constant model
    let mean = ys.iter().copied().sum::<S>() / S::lit(n as f64);
    let zero = vec![S::zero(); dim];
    let mut b = median(ys);
    if objective(&zero, mean) < objective(&zero, b) {
        b = mean;
    }
    let mut w = zero;
    let mut best = (objective(&w, b), w.clone(), b);

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = n.min(MINI_BATCH);
    let mut cursor = n;
    let mut grad_w = vec![S::zero(); dim];
    let half = hyper.steps / 2;
    let check_every = (n / batch).max(1);
    for step in 0..hyper.steps {
        if cursor + batch > n {
            if batch < n {
                order.shuffle(&mut rng);
            }
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;

        // subgradient of J / (C n) estimated on the batch
        let inv_b = S::one() / S::lit(batch as f64);
        let reg = S::one() / (c * S::lit(n as f64));
        for (g, &wi) in grad_w.iter_mut().zip(&w) {
            *g = wi * reg;
        }
        let mut grad_b = S::zero();
        for &i in idx {
            let r = dot(&w, &xs[i]) + b - ys[i];
            if r.abs() > eps {
                let s = r.signum() * inv_b;
                for (g, &xv) in grad_w.iter_mut().zip(&xs[i]) {
                    *g = *g + s * xv;
                }
                grad_b = grad_b + s;
            }
        }
        // constant rate, then linear decay to 1% over the second half
        let frac = if step < half {
            1.0
        } else {
            1.0 - 0.99 * (step - half) as f64 / (hyper.steps - half).max(1) as f64
        };
        let eta = S::lit(hyper.step_size * frac);
        for (wi, &g) in w.iter_mut().zip(&grad_w) {
            *wi = *wi - eta * g;
        }
        b = b - eta * grad_b;

        // full objective once per pass over the data
        if step % check_every == 0 || step + 1 == hyper.steps {
            let obj = objective(&w, b);
            if obj < best.0 {
                best = (obj, w.clone(), b);
            }
        }
    }
    let (_, w, b) = best;
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::Train("regressor diverged".into()));
    }
    Ok(SvrModel {
        factor_index,
        w,
        b,
        hyper,
        trained: true,
    })
}

/// Trains the regressor for factor `j` on a cognitive-annotated dataset.
pub fn train_svr<S: Scalar>(
    dp: &LabeledDataset,
    j: usize,
    featurizer: &SvrFeaturizer,
    table: &EmbeddingTable<S>,
    hyper: SvrHyper,
) -> Result<SvrModel<S>> {
    if dp.len() < 2 {
        return Err(Error::Train(format!(
            "need at least 2 annotated texts, got {}",
            dp.len()
        )));
    }
    let ys = dp
        .factor_values(j)
        .ok_or_else(|| Error::Train("dataset lacks cognitive annotations".into()))?;
    let xs: Vec<Vec<S>> = dp
        .records
        .iter()
        .map(|r| featurizer.featurize(&r.text.tokens, table))
        .collect();
    let ys: Vec<S> = ys.into_iter().map(S::lit).collect();
    fit_svr(&xs, &ys, j, hyper)
}

/// One regressor per factor sharing a featurizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CognitionModel<S> {
    pub factors: Vec<String>,
    pub featurizer: SvrFeaturizer,
    pub models: Vec<SvrModel<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturizerMode {
    #[default]
    MeanEmbedding,
    TfIdf,
}

impl<S: Scalar> CognitionModel<S> {
    /// Trains all factor regressors (in parallel) on `dp`.
    pub fn train(
        dp: &LabeledDataset,
        table: &EmbeddingTable<S>,
        mode: FeaturizerMode,
        hyper: SvrHyper,
    ) -> Result<Self> {
        let featurizer = match mode {
            FeaturizerMode::MeanEmbedding => SvrFeaturizer::MeanEmbedding,
            FeaturizerMode::TfIdf => SvrFeaturizer::TfIdf(TfIdfVocabulary::fit(
                dp.records.iter().map(|r| r.text.tokens.as_slice()),
            )),
        };
        let q = dp.labels.q();
        let models = (0..q)
            .into_par_iter()
            .map(|j| train_svr(dp, j, &featurizer, table, hyper))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            factors: dp.labels.factors.clone(),
            featurizer,
            models,
        })
    }

    pub fn q(&self) -> usize {
        self.factors.len()
    }

    pub fn infer(&self, text: &ShortText, table: &EmbeddingTable<S>) -> Result<CognitiveVector> {
        infer_cognitive_vector(self, &text.tokens, table)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        persist::write_json(
            &dir.join("cognition.json"),
            &CognitionManifest {
                factors: self.factors.clone(),
                featurizer: self.featurizer.clone(),
            },
        )?;
        for m in &self.models {
            let stem = format!("svr_{}", m.factor_index);
            persist::write_json(
                &dir.join(format!("{stem}.json")),
                &SvrManifest {
                    factor: m.factor_index,
                    factor_name: self.factors.get(m.factor_index).cloned().unwrap_or_default(),
                    dim: m.dim(),
                    hyper: m.hyper,
                },
            )?;
            persist::write_f64s(
                &dir.join(format!("{stem}.bin")),
                m.w.iter().copied().chain(std::iter::once(m.b)),
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: CognitionManifest = persist::read_json(&dir.join("cognition.json"))?;
        let mut models = Vec::new();
        for j in 0..manifest.factors.len() {
            let stem = format!("svr_{j}");
            let m: SvrManifest = persist::read_json(&dir.join(format!("{stem}.json")))?;
            let mut flat: Vec<S> = persist::read_f64s(&dir.join(format!("{stem}.bin")))?;
            if flat.len() != m.dim + 1 {
                return Err(Error::Format(format!(
                    "{stem}.bin holds {} values, expected {}",
                    flat.len(),
                    m.dim + 1
                )));
            }
            let b = flat.pop().expect("non-empty");
            models.push(SvrModel {
                factor_index: m.factor,
                w: flat,
                b,
                hyper: m.hyper,
                trained: true,
            });
        }
        Ok(Self {
            factors: manifest.factors,
            featurizer: manifest.featurizer,
            models,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CognitionManifest {
    factors: Vec<String>,
    featurizer: SvrFeaturizer,
}

#[derive(Debug, Serialize, Deserialize)]
struct SvrManifest {
    factor: usize,
    factor_name: String,
    dim: usize,
    hyper: SvrHyper,
}

/// Per-factor predictions in factor order.
pub fn infer_cognitive_vector<S: Scalar>(
    model: &CognitionModel<S>,
    tokens: &[String],
    table: &EmbeddingTable<S>,
) -> Result<CognitiveVector> {
    let x = model.featurizer.featurize(tokens, table);
    (0..model.q())
        .map(|j| {
            let m = model
                .models
                .iter()
                .find(|m| m.factor_index == j && m.trained)
                .ok_or_else(|| Error::Config(format!("no trained regressor for factor {j}")))?;
            predict_factor(m, &x).map(|v| v.as_f64())
        })
        .collect::<Result<Vec<_>>>()
        .map(CognitiveVector)
}

/// Copy of `ds` whose records carry inferred cognitive vectors.
pub fn annotate<S: Scalar>(
    ds: &LabeledDataset,
    model: &CognitionModel<S>,
    table: &EmbeddingTable<S>,
) -> Result<LabeledDataset> {
    let records = ds
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.cognitive = Some(infer_cognitive_vector(model, &r.text.tokens, table)?);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut labels = ds.labels.clone();
    labels.factors = model.factors.clone();
    let schema = match ds.schema {
        crate::corpus::Schema::Emotion | crate::corpus::Schema::Both => crate::corpus::Schema::Both,
        crate::corpus::Schema::Cognitive | crate::corpus::Schema::Text => crate::corpus::Schema::Cognitive,
    };
    LabeledDataset::new(records, schema, labels)
}
