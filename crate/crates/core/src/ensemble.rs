//! Cognition-aware ensemble.
//!
//! One classifier is trained per cognitive category plus a global one on
//! the whole corpus. A query is scored by the classifier on its side of each
//! factor's threshold and by the global classifier; the binarised outputs
//! form a consensus matrix that is reduced by per-emotion majority vote.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cognition::{infer_cognitive_vector, CognitionModel};
use crate::convnet::{Example, InputShape, Network, NetworkHyper};
use crate::corpus::{compute_gamma, CognitiveVector, EmotionVector, LabeledDataset, ShortText};
use crate::error::{Error, Result};
use crate::features::{word_features, WordFeatures};
use crate::partition::{categorize, side_of, CognitiveCategory, ThresholdVector};
use crate::persist::{read_json, write_json};
use crate::resources::Resources;
use crate::scalar::Scalar;

pub const DEFAULT_MIN_CATEGORY: usize = 8;
pub const VOTE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ClassifierId {
    /// One-based category index.
    Category(usize),
    Global,
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Category(i) => write!(f, "h{i}"),
            Self::Global => write!(f, "global"),
        }
    }
}

impl FromStr for ClassifierId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "global" {
            return Ok(Self::Global);
        }
        s.strip_prefix('h')
            .and_then(|n| n.parse().ok())
            .filter(|&n| n >= 1)
            .map(Self::Category)
            .ok_or_else(|| Error::Format(format!("bad classifier id '{s}'")))
    }
}

impl From<ClassifierId> for String {
    fn from(id: ClassifierId) -> Self {
        id.to_string()
    }
}

impl TryFrom<String> for ClassifierId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseClassifier<S> {
    pub id: ClassifierId,
    pub network: Network<S>,
    pub train_size: usize,
    pub final_loss: Option<f64>,
}

impl<S: Scalar> BaseClassifier<S> {
    pub fn seed(&self) -> u64 {
        self.network.hyper.seed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub network: NetworkHyper,
    pub min_category_size: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            network: NetworkHyper::default(),
            min_category_size: DEFAULT_MIN_CATEGORY,
        }
    }
}

/// Static word features and labels for every record of an emotion corpus.
#[derive(Debug, Clone)]
pub struct TrainingSet<S> {
    pub shape: InputShape,
    /// Longest text in the corpus; longer queries are truncated to it.
    pub gamma: usize,
    pub words: Vec<WordFeatures<S>>,
    pub labels: Vec<Vec<bool>>,
}

impl<S: Scalar> TrainingSet<S> {
    /// Matrix height is the longest text, raised to the widest window.
    pub fn from_dataset(de: &LabeledDataset, resources: &Resources<S>, windows: &[usize]) -> Result<Self> {
        let gamma = compute_gamma(de)?;
        let labels = de
            .emotion_labels()
            .ok_or_else(|| Error::Schema("training data lacks emotion labels".into()))?
            .into_iter()
            .map(|e| e.0)
            .collect();
        let words = de
            .records
            .par_iter()
            .map(|r| word_features(&r.text.tokens, r.pos.as_deref(), gamma, resources))
            .collect();
        let rows = gamma.max(windows.iter().copied().max().unwrap_or(1));
        Ok(Self {
            shape: InputShape {
                rows,
                dim: resources.dim(),
                emotion_width: resources.emotion_width(),
                pos_width: resources.pos_width(),
                labels: de.labels.k(),
            },
            gamma,
            words,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn examples(&self, members: &[usize]) -> Vec<Example<'_, S>> {
        members
            .iter()
            .map(|&i| Example {
                words: &self.words[i],
                labels: &self.labels[i],
            })
            .collect()
    }
}

/// Trains one classifier on `members`; its seed is the base seed plus `offset`.
fn train_members<S: Scalar>(
    id: ClassifierId,
    label: String,
    members: &[usize],
    offset: u64,
    data: &TrainingSet<S>,
    config: &EnsembleConfig,
) -> Result<BaseClassifier<S>> {
    if members.len() < config.min_category_size {
        return Err(Error::InsufficientData {
            category: label,
            size: members.len(),
            min: config.min_category_size,
        });
    }
    let mut hyper = config.network.clone();
    hyper.seed = hyper.seed.wrapping_add(offset);
    let mut network = Network::new(data.shape, hyper)?;
    let report = network.train(&data.examples(members))?;
    log::info!(
        "trained {id} on {} texts, final loss {:.4}",
        members.len(),
        report.final_loss().unwrap_or(f64::NAN)
    );
    Ok(BaseClassifier {
        id,
        network,
        train_size: members.len(),
        final_loss: report.final_loss(),
    })
}

/// Classifier for one cognitive category, seeded by its index.
pub fn train_base<S: Scalar>(
    cat: &CognitiveCategory,
    data: &TrainingSet<S>,
    config: &EnsembleConfig,
) -> Result<BaseClassifier<S>> {
    train_members(
        ClassifierId::Category(cat.index),
        format!("h{} ({:?} side of factor {})", cat.index, cat.side, cat.factor),
        &cat.members,
        cat.index as u64,
        data,
        config,
    )
}

/// Classifier over the whole corpus, seeded after the `2q` category ones.
pub fn train_global<S: Scalar>(data: &TrainingSet<S>, q: usize, config: &EnsembleConfig) -> Result<BaseClassifier<S>> {
    let all: Vec<usize> = (0..data.len()).collect();
    train_members(ClassifierId::Global, "global".into(), &all, 2 * q as u64 + 1, data, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<S> {
    /// `h1 … h2q` in index order, then the global classifier.
    pub classifiers: Vec<BaseClassifier<S>>,
    pub alphas: ThresholdVector<S>,
    pub gamma: usize,
    pub emotions: Vec<String>,
    pub factors: Vec<String>,
    /// Digests of the resource files the model was trained with.
    pub fingerprints: Vec<String>,
}

/// Trains all `2q + 1` classifiers in parallel.
///
/// `de` must carry cognitive vectors; records are split into categories by
/// `alphas`.
pub fn train_ensemble<S: Scalar>(
    de: &LabeledDataset,
    alphas: &ThresholdVector<S>,
    resources: &Resources<S>,
    config: &EnsembleConfig,
) -> Result<EnsembleModel<S>> {
    if de.labels.q() != alphas.q() {
        return Err(Error::shape(format!(
            "dataset has {} factors, thresholds cover {}",
            de.labels.q(),
            alphas.q()
        )));
    }
    let cats = categorize(de, alphas)?;
    let data = TrainingSet::from_dataset(de, resources, &config.network.windows)?;
    train_with_categories(&cats, &data, alphas, config).map(|classifiers| EnsembleModel {
        classifiers,
        alphas: ThresholdVector::from_alphas(alphas.alphas.clone()),
        gamma: data.gamma,
        emotions: de.labels.emotions.clone(),
        factors: de.labels.factors.clone(),
        fingerprints: resources.fingerprints.clone(),
    })
}

fn train_with_categories<S: Scalar>(
    cats: &[CognitiveCategory],
    data: &TrainingSet<S>,
    alphas: &ThresholdVector<S>,
    config: &EnsembleConfig,
) -> Result<Vec<BaseClassifier<S>>> {
    let q = alphas.q();
    (0..=cats.len())
        .into_par_iter()
        .map(|i| match cats.get(i) {
            Some(cat) => train_base(cat, data, config),
            None => train_global(data, q, config),
        })
        .collect()
}

/// Low classifier of each factor when the score is below its threshold,
/// high otherwise; the global classifier last.
pub fn select_classifiers<S: Scalar>(f: &CognitiveVector, alphas: &ThresholdVector<S>) -> Result<Vec<ClassifierId>> {
    if f.len() != alphas.q() {
        return Err(Error::shape(format!(
            "cognitive vector has {} scores, thresholds cover {}",
            f.len(),
            alphas.q()
        )));
    }
    let mut out: Vec<ClassifierId> = f
        .0
        .iter()
        .zip(&alphas.alphas)
        .enumerate()
        .map(|(j, (&v, &alpha))| ClassifierId::Category(CognitiveCategory::index_for(j, side_of(S::lit(v), alpha))))
        .collect();
    out.push(ClassifierId::Global);
    Ok(out)
}

/// `k × voters` binary votes; the last column is the global classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusMatrix {
    rows: Vec<Vec<bool>>,
}

impl ConsensusMatrix {
    /// Panics on ragged or column-less rows.
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        let voters = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == voters && voters > 0), "ragged consensus matrix");
        Self { rows }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn voters(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, t: usize) -> bool {
        self.rows[i][t]
    }
}

/// Thresholds per-classifier probabilities (`scores[t][i]`) at 0.5, `≥` voting yes.
pub fn consensus_from_scores<S: Scalar>(scores: &[Vec<S>]) -> ConsensusMatrix {
    let k = scores.first().map_or(0, Vec::len);
    let cut = S::lit(VOTE_THRESHOLD);
    ConsensusMatrix::from_rows((0..k).map(|i| scores.iter().map(|s| s[i] >= cut).collect()).collect())
}

/// 1 when `y == c`.
pub fn indicator(y: bool, c: bool) -> u8 {
    u8::from(y == c)
}

/// Per emotion, the value with more votes; ties go to the global column.
pub fn majority_vote(a: &ConsensusMatrix) -> EmotionVector {
    let global = a.voters() - 1;
    EmotionVector(
        (0..a.k())
            .map(|i| {
                let tally = |c: bool| a.row(i).iter().map(|&y| usize::from(indicator(y, c))).sum::<usize>();
                let (yes, no) = (tally(true), tally(false));
                match yes.cmp(&no) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => a.get(i, global),
                }
            })
            .collect(),
    )
}

/// Index of the largest summed score; ties go to the lowest index.
pub fn argmax_summed<S: Scalar>(scores: &[Vec<S>]) -> usize {
    let k = scores.first().map_or(0, Vec::len);
    let sums: Vec<S> = (0..k).map(|i| scores.iter().map(|s| s[i]).sum()).collect();
    let mut best = 0;
    for (i, &v) in sums.iter().enumerate() {
        if v > sums[best] {
            best = i;
        }
    }
    best
}

impl<S: Scalar> EnsembleModel<S> {
    pub fn q(&self) -> usize {
        self.alphas.q()
    }

    pub fn k(&self) -> usize {
        self.emotions.len()
    }

    pub fn classifier(&self, id: ClassifierId) -> Option<&BaseClassifier<S>> {
        self.classifiers.iter().find(|c| c.id == id)
    }

    /// Static word features of a query, truncated to the training length.
    pub fn text_features(&self, tokens: &[String], tags: Option<&[String]>, resources: &Resources<S>) -> WordFeatures<S> {
        word_features(tokens, tags, self.gamma, resources)
    }

    /// Sigmoid outputs of the listed classifiers, one row per classifier.
    pub fn scores(&self, ids: &[ClassifierId], words: &WordFeatures<S>) -> Result<Vec<Vec<S>>> {
        ids.iter()
            .map(|&id| {
                self.classifier(id)
                    .ok_or_else(|| Error::Config(format!("ensemble has no classifier {id}")))?
                    .network
                    .predict_proba(words)
            })
            .collect()
    }

    /// Consensus matrix of the classifiers selected for `f`.
    pub fn build_consensus(&self, f: &CognitiveVector, words: &WordFeatures<S>) -> Result<ConsensusMatrix> {
        let ids = select_classifiers(f, &self.alphas)?;
        Ok(consensus_from_scores(&self.scores(&ids, words)?))
    }

    pub fn predict_features(&self, f: &CognitiveVector, words: &WordFeatures<S>) -> Result<EmotionVector> {
        Ok(majority_vote(&self.build_consensus(f, words)?))
    }

    pub fn predict_multiclass_features(&self, f: &CognitiveVector, words: &WordFeatures<S>) -> Result<usize> {
        let ids = select_classifiers(f, &self.alphas)?;
        Ok(argmax_summed(&self.scores(&ids, words)?))
    }

    /// Cognitive vector and word features for a raw query.
    pub fn prepare(
        &self,
        text: &ShortText,
        tags: Option<&[String]>,
        cognition: &CognitionModel<S>,
        resources: &Resources<S>,
    ) -> Result<(CognitiveVector, WordFeatures<S>)> {
        let f = infer_cognitive_vector(cognition, &text.tokens, &resources.embeddings)?;
        Ok((f, self.text_features(&text.tokens, tags, resources)))
    }

    /// Multi-label emotion vector for a text.
    pub fn predict(
        &self,
        text: &ShortText,
        tags: Option<&[String]>,
        cognition: &CognitionModel<S>,
        resources: &Resources<S>,
    ) -> Result<EmotionVector> {
        let (f, words) = self.prepare(text, tags, cognition, resources)?;
        self.predict_features(&f, &words)
    }

    /// Single emotion index for a text.
    pub fn predict_multiclass(
        &self,
        text: &ShortText,
        tags: Option<&[String]>,
        cognition: &CognitionModel<S>,
        resources: &Resources<S>,
    ) -> Result<usize> {
        let (f, words) = self.prepare(text, tags, cognition, resources)?;
        self.predict_multiclass_features(&f, &words)
    }

    /// Writes `ensemble.json` and one network file pair per classifier.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = EnsembleManifest {
            scalar: S::type_name().to_string(),
            q: self.q(),
            k: self.k(),
            gamma: self.gamma,
            alphas: self.alphas.alphas.iter().map(|a| a.as_f64()).collect(),
            emotions: self.emotions.clone(),
            factors: self.factors.clone(),
            fingerprints: self.fingerprints.clone(),
            classifiers: self
                .classifiers
                .iter()
                .map(|c| ClassifierEntry {
                    id: c.id,
                    train_size: c.train_size,
                    final_loss: c.final_loss,
                })
                .collect(),
        };
        write_json(&dir.join("ensemble.json"), &manifest)?;
        for c in &self.classifiers {
            c.network.save(dir, &c.id.to_string())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: EnsembleManifest = read_json(&dir.join("ensemble.json"))?;
        let mut expected: Vec<ClassifierId> = (1..=2 * m.q).map(ClassifierId::Category).collect();
        expected.push(ClassifierId::Global);
        let ids: Vec<ClassifierId> = m.classifiers.iter().map(|c| c.id).collect();
        if ids != expected || m.alphas.len() != m.q || m.emotions.len() != m.k {
            return Err(Error::Format("ensemble manifest is inconsistent".into()));
        }
        let classifiers = m
            .classifiers
            .iter()
            .map(|c| {
                let network = Network::load(dir, &c.id.to_string())?;
                if network.shape.labels != m.k {
                    return Err(Error::Format(format!("{} predicts {} emotions", c.id, network.shape.labels)));
                }
                Ok(BaseClassifier {
                    id: c.id,
                    network,
                    train_size: c.train_size,
                    final_loss: c.final_loss,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            classifiers,
            alphas: ThresholdVector::from_alphas(m.alphas.into_iter().map(S::lit).collect()),
            gamma: m.gamma,
            emotions: m.emotions,
            factors: m.factors,
            fingerprints: m.fingerprints,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassifierEntry {
    id: ClassifierId,
    train_size: usize,
    final_loss: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleManifest {
    scalar: String,
    q: usize,
    k: usize,
    gamma: usize,
    alphas: Vec<f64>,
    emotions: Vec<String>,
    factors: Vec<String>,
    fingerprints: Vec<String>,
    classifiers: Vec<ClassifierEntry>,
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::convnet::RegularizerConfig;
    use crate::corpus::{LabelSpace, Record, Schema};
    use crate::resources::{EmbeddingTable, Lexicon, PosTagset};
    use proptest::prelude::*;

    fn tv(alphas: &[f64]) -> ThresholdVector<f64> {
        ThresholdVector::from_alphas(alphas.to_vec())
    }

    #[test]
    fn selection_examples() {
        let ids = select_classifiers(&CognitiveVector(vec![2.5, 3.0]), &tv(&[3.0, 3.0])).unwrap();
        assert_eq!(ids, vec![ClassifierId::Category(1), ClassifierId::Category(4), ClassifierId::Global]);
        let ids = select_classifiers(&CognitiveVector(vec![0.0, 1.0, 2.0]), &tv(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(
            ids,
            vec![
                ClassifierId::Category(1),
                ClassifierId::Category(3),
                ClassifierId::Category(5),
                ClassifierId::Global
            ]
        );
        assert!(select_classifiers(&CognitiveVector(vec![1.0]), &tv(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn consensus_thresholds_at_half() {
        let a = consensus_from_scores(&[vec![0.9, 0.9, 0.9], vec![0.5, 0.49, 0.1], vec![0.0, 1.0, 0.7]]);
        assert_eq!((a.k(), a.voters()), (3, 3));
        assert_eq!(a.row(0), &[true, true, false]);
        assert_eq!(a.row(1), &[true, false, true]);
        assert_eq!(a.row(2), &[true, false, true]);
    }

    #[test]
    fn vote_examples() {
        let vote = |row: Vec<bool>| majority_vote(&ConsensusMatrix::from_rows(vec![row])).0[0];
        assert!(vote(vec![true, true, false]));
        assert!(!vote(vec![true, false, false]));
        assert!(!vote(vec![true, false]));
        assert!(vote(vec![false, true]));
        assert_eq!(indicator(true, true), 1);
        assert_eq!(indicator(true, false), 0);
        for y in [false, true] {
            assert_eq!(indicator(y, false) + indicator(y, true), 1);
        }
    }

    #[test]
    fn multiclass_ties_go_low() {
        assert_eq!(argmax_summed(&[vec![0.6, 0.6, 0.1], vec![0.6, 0.6, 0.2]]), 0);
        assert_eq!(argmax_summed(&[vec![0.1, 0.2, 0.9], vec![0.3, 0.1, 0.8]]), 2);
    }

    #[test]
    fn classifier_ids_round_trip() {
        for id in [ClassifierId::Category(1), ClassifierId::Category(12), ClassifierId::Global] {
            assert_eq!(id.to_string().parse::<ClassifierId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(serde_json::from_str::<ClassifierId>(&json).unwrap(), id);
        }
        assert!("h0".parse::<ClassifierId>().is_err());
        assert!("x3".parse::<ClassifierId>().is_err());
    }

    proptest! {
        #[test]
        fn never_selects_both_sides(f in prop::collection::vec(-5.0f64..5.0, 1..6), seed in any::<u64>()) {
            let alphas: Vec<f64> = f.iter().enumerate().map(|(i, _)| ((seed >> i) % 7) as f64 - 3.0).collect();
            let ids = select_classifiers(&CognitiveVector(f.clone()), &tv(&alphas)).unwrap();
            prop_assert_eq!(ids.len(), f.len() + 1);
            for j in 0..f.len() {
                let low = ids.contains(&ClassifierId::Category(2 * j + 1));
                let high = ids.contains(&ClassifierId::Category(2 * j + 2));
                prop_assert!(low ^ high);
            }
        }

        #[test]
        fn odd_voter_counts_need_no_tie_break(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..5)) {
            let v = majority_vote(&ConsensusMatrix::from_rows(rows.clone()));
            for (i, r) in rows.iter().enumerate() {
                let yes = r.iter().filter(|&&b| b).count();
                prop_assert_eq!(v.0[i], yes >= 2);
            }
        }
    }

    fn toy_resources() -> Resources<f64> {
        let words = ["sun", "smile", "storm", "rage", "calm", "loud", "quiet", "day"];
        let table = EmbeddingTable::from_entries(
            3,
            words.iter().enumerate().map(|(i, w)| {
                let x = i as f64;
                (*w, vec![(x * 0.7).sin(), (x * 1.3).cos(), x / 8.0 - 0.5])
            }),
        )
        .unwrap();
        let lex = Lexicon::new(
            "toy",
            vec!["joy".into(), "anger".into()],
            vec![
                ("sun".to_string(), vec![0.8, 0.0]),
                ("smile".to_string(), vec![0.9, 0.0]),
                ("storm".to_string(), vec![0.0, 0.6]),
                ("rage".to_string(), vec![0.0, 1.0]),
            ],
        )
        .unwrap();
        Resources::new(table, vec![lex], PosTagset::default())
    }

    fn toy_dataset(n: usize) -> LabeledDataset {
        let records = (0..n)
            .map(|i| {
                let joy = i % 2 == 0;
                let calm = i % 3 != 0;
                let words = [
                    if joy { "sun" } else { "rage" },
                    if calm { "calm" } else { "loud" },
                    if joy { "smile" } else { "storm" },
                    "day",
                ];
                let tokens: Vec<String> = words.iter().take(2 + i % 3).map(|s| s.to_string()).collect();
                Record {
                    text: ShortText::from_tokens(format!("t{i}"), tokens).unwrap(),
                    emotions: Some(EmotionVector(vec![joy, !joy])),
                    cognitive: Some(CognitiveVector(vec![if calm { 1.0 } else { 4.0 } + (i % 5) as f64 * 0.1])),
                    pos: None,
                }
            })
            .collect();
        LabeledDataset::new(
            records,
            Schema::Both,
            LabelSpace::new(vec!["joy".into(), "anger".into()], vec!["NEU".into()]),
        )
        .unwrap()
    }

    fn toy_config() -> EnsembleConfig {
        EnsembleConfig {
            network: NetworkHyper {
                windows: vec![1, 2],
                n_filters: 4,
                hidden: vec![8],
                attention_hidden: 4,
                regularizer: RegularizerConfig::nsw_default(),
                learning_rate: 1e-2,
                batch_size: 8,
                epochs: 4,
                seed: 17,
            },
            min_category_size: 4,
        }
    }

    #[test]
    fn trains_two_q_plus_one_classifiers() {
        let ds = toy_dataset(30);
        let res = toy_resources();
        let alphas = tv(&[2.5]);
        let model = train_ensemble(&ds, &alphas, &res, &toy_config()).unwrap();
        let ids: Vec<ClassifierId> = model.classifiers.iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![ClassifierId::Category(1), ClassifierId::Category(2), ClassifierId::Global]);
        assert_eq!(model.classifier(ClassifierId::Category(1)).unwrap().train_size, 20);
        assert_eq!(model.classifier(ClassifierId::Global).unwrap().train_size, 30);
        assert_eq!(model.classifier(ClassifierId::Global).unwrap().seed(), 17 + 3);

        // each classifier equals one trained on its own
        let cats = categorize(&ds, &alphas).unwrap();
        let data = TrainingSet::from_dataset(&ds, &res, &[1, 2]).unwrap();
        let alone = train_base(&cats[1], &data, &toy_config()).unwrap();
        assert_eq!(&alone, model.classifier(ClassifierId::Category(2)).unwrap());

        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let back = EnsembleModel::<f64>::load(dir.path()).unwrap();
        assert_eq!(back, model);

        let words = model.text_features(&ds.records[0].text.tokens, None, &res);
        let f = CognitiveVector(vec![1.0]);
        assert_eq!(
            back.predict_features(&f, &words).unwrap(),
            model.predict_features(&f, &words).unwrap()
        );
    }

    #[test]
    fn small_categories_are_rejected() {
        let ds = toy_dataset(12);
        let res = toy_resources();
        let mut config = toy_config();
        config.min_category_size = 5;
        // 4 of 12 records fall on the high side
        let err = train_ensemble(&ds, &tv(&[2.5]), &res, &config).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { size: 4, min: 5, .. }), "{err}");
    }
}
