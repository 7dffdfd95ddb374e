//! End-to-end workflows: training the regressors and the ensemble,
//! batch prediction, evaluation and k-fold cross-validation.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cognition::{annotate, CognitionModel, FeaturizerMode, SvrHyper};
use crate::corpus::{kfold_split, CognitiveVector, EmotionVector, LabeledDataset, Schema};
use crate::ensemble::{train_ensemble, ClassifierId, EnsembleConfig, EnsembleModel};
use crate::error::{Error, Result};
use crate::features::WordFeatures;
use crate::metrics::{average_reports, compute_metrics, compute_multiclass, EvalMode, MetricsReport};
use crate::partition::{fit_thresholds, ThresholdVector};
use crate::persist::{read_json, write_json};
use crate::resources::Resources;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub ensemble: EnsembleConfig,
    pub svr: SvrHyper,
    pub featurizer: FeaturizerMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            svr: SvrHyper::default(),
            featurizer: FeaturizerMode::MeanEmbedding,
        }
    }
}

/// Cognitive regressors plus the emotion ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline<S> {
    pub cognition: CognitionModel<S>,
    pub ensemble: EnsembleModel<S>,
}

/// Everything a query needs before voting.
struct Prepared<S> {
    cognitive: CognitiveVector,
    words: WordFeatures<S>,
}

/// Trains the regressors on `dp`, fits thresholds on its factor scores, then
/// trains the ensemble on `de` annotated with inferred scores.
pub fn train_pipeline<S: Scalar>(
    dp: &LabeledDataset,
    de: &LabeledDataset,
    resources: &Resources<S>,
    config: &PipelineConfig,
) -> Result<TrainedPipeline<S>> {
    let cognition = CognitionModel::train(dp, &resources.embeddings, config.featurizer, config.svr)?;
    let alphas = fit_thresholds(dp, None)?;
    train_with_cognition(cognition, &alphas, de, resources, config)
}

fn train_with_cognition<S: Scalar>(
    cognition: CognitionModel<S>,
    alphas: &ThresholdVector<S>,
    de: &LabeledDataset,
    resources: &Resources<S>,
    config: &PipelineConfig,
) -> Result<TrainedPipeline<S>> {
    let annotated = annotate(de, &cognition, &resources.embeddings)?;
    let ensemble = train_ensemble(&annotated, alphas, resources, &config.ensemble)?;
    Ok(TrainedPipeline { cognition, ensemble })
}

/// Index of the single positive label, for multi-class evaluation.
fn single_label(v: &EmotionVector, id: &str) -> Result<usize> {
    let mut on = v.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i);
    match (on.next(), on.next()) {
        (Some(i), None) => Ok(i),
        _ => Err(Error::Schema(format!(
            "record '{id}' needs exactly one emotion for multi-class evaluation"
        ))),
    }
}

impl<S: Scalar> TrainedPipeline<S> {
    fn prepare(&self, ds: &LabeledDataset, resources: &Resources<S>) -> Result<Vec<Prepared<S>>> {
        ds.records
            .par_iter()
            .map(|r| {
                let (cognitive, words) = self
                    .ensemble
                    .prepare(&r.text, r.pos.as_deref(), &self.cognition, resources)?;
                Ok(Prepared { cognitive, words })
            })
            .collect()
    }

    /// Multi-label predictions, in record order.
    pub fn predict_dataset(&self, ds: &LabeledDataset, resources: &Resources<S>) -> Result<Vec<EmotionVector>> {
        self.prepare(ds, resources)?
            .par_iter()
            .map(|p| self.ensemble.predict_features(&p.cognitive, &p.words))
            .collect()
    }

    /// Single-label predictions, in record order.
    pub fn predict_multiclass_dataset(&self, ds: &LabeledDataset, resources: &Resources<S>) -> Result<Vec<usize>> {
        self.prepare(ds, resources)?
            .par_iter()
            .map(|p| self.ensemble.predict_multiclass_features(&p.cognitive, &p.words))
            .collect()
    }

    /// Reports for the full ensemble and for its global classifier alone.
    pub fn evaluate_both(
        &self,
        ds: &LabeledDataset,
        resources: &Resources<S>,
        mode: EvalMode,
    ) -> Result<(MetricsReport, MetricsReport)> {
        let truth = ds
            .emotion_labels()
            .ok_or_else(|| Error::Schema("evaluation data lacks emotion labels".into()))?;
        let prepared = self.prepare(ds, resources)?;
        let global = [ClassifierId::Global];
        let emotions = &self.ensemble.emotions;
        match mode {
            EvalMode::MultiLabel => {
                let (ens, solo): (Vec<EmotionVector>, Vec<EmotionVector>) = prepared
                    .par_iter()
                    .map(|p| {
                        let ens = self.ensemble.predict_features(&p.cognitive, &p.words)?;
                        let scores = self.ensemble.scores(&global, &p.words)?;
                        let cut = S::lit(crate::ensemble::VOTE_THRESHOLD);
                        Ok((ens, EmotionVector(scores[0].iter().map(|&s| s >= cut).collect())))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip();
                Ok((
                    compute_metrics(&ens, &truth, emotions)?,
                    compute_metrics(&solo, &truth, emotions)?,
                ))
            }
            EvalMode::MultiClass => {
                let truth: Vec<usize> = truth
                    .iter()
                    .zip(&ds.records)
                    .map(|(v, r)| single_label(v, &r.text.id))
                    .collect::<Result<_>>()?;
                let (ens, solo): (Vec<usize>, Vec<usize>) = prepared
                    .par_iter()
                    .map(|p| {
                        let ens = self.ensemble.predict_multiclass_features(&p.cognitive, &p.words)?;
                        let scores = self.ensemble.scores(&global, &p.words)?;
                        Ok((ens, crate::ensemble::argmax_summed(&scores)))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip();
                Ok((
                    compute_multiclass(&ens, &truth, emotions)?,
                    compute_multiclass(&solo, &truth, emotions)?,
                ))
            }
        }
    }

    pub fn evaluate(&self, ds: &LabeledDataset, resources: &Resources<S>, mode: EvalMode) -> Result<MetricsReport> {
        self.evaluate_both(ds, resources, mode).map(|(r, _)| r)
    }

    /// `dir/ensemble/…` and `dir/cognition/…`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let cog = dir.join("cognition");
        fs::create_dir_all(&cog).map_err(|e| Error::io(&cog, e))?;
        self.cognition.save(&cog)?;
        self.ensemble.save(&dir.join("ensemble"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let cognition = CognitionModel::load(&dir.join("cognition"))?;
        let ensemble = EnsembleModel::load(&dir.join("ensemble"))?;
        if cognition.factors != ensemble.factors {
            return Err(Error::Format("regressor and ensemble factors differ".into()));
        }
        Ok(Self { cognition, ensemble })
    }
}

/// Where the resources used for training came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceManifest {
    pub embeddings: PathBuf,
    pub lexicons: Vec<PathBuf>,
    pub tagset: Vec<String>,
    pub fingerprints: Vec<String>,
}

impl ResourceManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("resources.json"), self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join("resources.json"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub ensemble: MetricsReport,
    pub global: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldOutcome>,
    /// Fold-averaged ensemble metrics.
    pub ensemble: MetricsReport,
    /// Fold-averaged metrics of the global classifier alone.
    pub global: MetricsReport,
}

/// k-fold evaluation of the full pipeline on `de`.
///
/// Without a separate `dp`, each fold's training part doubles as regressor
/// data, so `de` must carry factor scores. With `dp`, regressors and
/// thresholds are fitted once on it.
pub fn cross_validate<S: Scalar>(
    de: &LabeledDataset,
    dp: Option<&LabeledDataset>,
    resources: &Resources<S>,
    config: &PipelineConfig,
    k_folds: usize,
    seed: u64,
    mode: EvalMode,
) -> Result<CrossValidation> {
    let plan = kfold_split(de, k_folds, seed)?;
    let shared = match dp {
        Some(dp) => Some((
            CognitionModel::train(dp, &resources.embeddings, config.featurizer, config.svr)?,
            fit_thresholds::<S>(dp, None)?,
        )),
        None => {
            if !matches!(de.schema, Schema::Both) {
                return Err(Error::Schema(
                    "cross-validation without separate factor data needs emotion and factor annotations".into(),
                ));
            }
            None
        }
    };
    let folds = (0..k_folds)
        .into_par_iter()
        .map(|fold| {
            let train = de.subset(&plan.train_indices(fold));
            let test = de.subset(&plan.test_indices(fold));
            let pipeline = match &shared {
                Some((cog, alphas)) => train_with_cognition(cog.clone(), alphas, &train, resources, config)?,
                None => train_pipeline(&train, &train, resources, config)?,
            };
            let (ensemble, global) = pipeline.evaluate_both(&test, resources, mode)?;
            log::info!("fold {}: macro F1 {:.4}", fold + 1, ensemble.macro_avg.f1);
            Ok(FoldOutcome { fold, ensemble, global })
        })
        .collect::<Result<Vec<_>>>()?;
    let ens: Vec<MetricsReport> = folds.iter().map(|f| f.ensemble.clone()).collect();
    let glob: Vec<MetricsReport> = folds.iter().map(|f| f.global.clone()).collect();
    Ok(CrossValidation {
        ensemble: average_reports(&ens)?,
        global: average_reports(&glob)?,
        folds,
    })
}
