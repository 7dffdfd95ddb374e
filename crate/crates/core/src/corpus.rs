//! Short-text datasets: tokenization, JSONL ingestion, padding, summaries
//! and k-fold assignment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Padding sentinel; maps to all-zero feature rows.
pub const PAD: &str = "<pad>";
pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

pub const DEFAULT_EMOTIONS: [&str; 5] = ["anger", "disgust", "fear", "joy", "sadness"];
pub const DEFAULT_FACTORS: [&str; 4] = ["NEU", "CON", "EXT", "AGR"];

/// Lowercases and splits a raw message into word tokens.
///
/// URLs become `<url>`, `@mentions` become `<user>`, hashtags lose their `#`.
/// Other punctuation separates tokens and is dropped; apostrophes inside a
/// word are kept (`i'm`).
pub fn tokenize(raw: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    for chunk in raw.split_whitespace() {
        if chunk == URL_TOKEN || chunk == USER_TOKEN {
            tokens.push(chunk.to_string());
            continue;
        }
        let lower = chunk.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
        {
            tokens.push(URL_TOKEN.to_string());
            continue;
        }
        if lower.starts_with('@') && lower.chars().nth(1).is_some_and(|c| c.is_alphanumeric() || c == '_') {
            tokens.push(USER_TOKEN.to_string());
            continue;
        }
        let body = lower.trim_start_matches('#');
        for piece in body.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
            let word = piece.trim_matches('\'');
            if !word.is_empty() {
                tokens.push(word.to_string());
            }
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(tokens)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortText {
    pub id: String,
    pub raw: String,
    pub tokens: Vec<String>,
}

impl ShortText {
    pub fn new(id: impl Into<String>, raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        let tokens = tokenize(&raw)?;
        Ok(Self {
            id: id.into(),
            raw,
            tokens,
        })
    }

    /// Builds a text from already-normalized tokens.
    pub fn from_tokens(id: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(Self {
            id: id.into(),
            raw: tokens.join(" "),
            tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Binary emotion labels in the configured emotion order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmotionVector(pub Vec<bool>);

impl EmotionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }

    pub fn one_hot(k: usize, label: usize) -> Self {
        Self((0..k).map(|i| i == label).collect())
    }
}

/// Real-valued cognitive factor scores in the configured factor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitiveVector(pub Vec<f64>);

impl CognitiveVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// Cognitive factor annotations (source data for the regressors).
    Cognitive,
    /// Emotion annotations.
    Emotion,
    Both,
    /// Bare texts, annotations optional.
    Text,
}

impl Schema {
    fn needs_emotions(self) -> bool {
        matches!(self, Schema::Emotion | Schema::Both)
    }

    fn needs_cognitive(self) -> bool {
        matches!(self, Schema::Cognitive | Schema::Both)
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cognitive" => Ok(Schema::Cognitive),
            "emotion" => Ok(Schema::Emotion),
            "both" => Ok(Schema::Both),
            "text" => Ok(Schema::Text),
            other => Err(Error::Config(format!("unknown schema '{other}'"))),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Schema::Cognitive => "cognitive",
            Schema::Emotion => "emotion",
            Schema::Both => "both",
            Schema::Text => "text",
        };
        f.write_str(s)
    }
}

/// Ordered emotion and factor names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub emotions: Vec<String>,
    pub factors: Vec<String>,
}

impl Default for LabelSpace {
    fn default() -> Self {
        Self {
            emotions: DEFAULT_EMOTIONS.iter().map(|s| s.to_string()).collect(),
            factors: DEFAULT_FACTORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LabelSpace {
    pub fn new(emotions: Vec<String>, factors: Vec<String>) -> Self {
        Self { emotions, factors }
    }

    pub fn k(&self) -> usize {
        self.emotions.len()
    }

    pub fn q(&self) -> usize {
        self.factors.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub text: ShortText,
    pub emotions: Option<EmotionVector>,
    pub cognitive: Option<CognitiveVector>,
    /// Externally supplied POS tags, one per token.
    pub pos: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub records: Vec<Record>,
    pub schema: Schema,
    pub labels: LabelSpace,
}

impl LabeledDataset {
    /// Validates schema conformance and id uniqueness.
    pub fn new(records: Vec<Record>, schema: Schema, labels: LabelSpace) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.text.id.as_str()) {
                return Err(Error::Schema(format!("duplicate id '{}'", r.text.id)));
            }
            if schema.needs_emotions() {
                match &r.emotions {
                    Some(e) if e.len() == labels.k() => {}
                    Some(e) => {
                        return Err(Error::Schema(format!(
                            "record '{}' has {} emotion labels, expected {}",
                            r.text.id,
                            e.len(),
                            labels.k()
                        )))
                    }
                    None => {
                        return Err(Error::Schema(format!(
                            "record '{}' lacks emotion labels",
                            r.text.id
                        )))
                    }
                }
            }
            if schema.needs_cognitive() {
                match &r.cognitive {
                    Some(c) if c.len() == labels.q() && c.0.iter().all(|v| v.is_finite()) => {}
                    _ => {
                        return Err(Error::Schema(format!(
                            "record '{}' lacks a finite {}-factor cognitive vector",
                            r.text.id,
                            labels.q()
                        )))
                    }
                }
            }
        }
        Ok(Self {
            records,
            schema,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Dataset restricted to the given record indices (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            schema: self.schema,
            labels: self.labels.clone(),
        }
    }

    /// Values of factor `j` across records; `None` when any record lacks
    /// a cognitive vector.
    pub fn factor_values(&self, j: usize) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.cognitive.as_ref().and_then(|c| c.0.get(j).copied()))
            .collect()
    }

    pub fn emotion_labels(&self) -> Option<Vec<EmotionVector>> {
        self.records.iter().map(|r| r.emotions.clone()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<Value>,
    text: Option<String>,
    #[serde(default)]
    emotions: Option<BTreeMap<String, Value>>,
    #[serde(default)]
    cognitive: Option<BTreeMap<String, Value>>,
    #[serde(default)]
    pos: Option<Vec<String>>,
}

fn parse_emotions(
    map: &BTreeMap<String, Value>,
    labels: &LabelSpace,
    line: usize,
) -> Result<EmotionVector> {
    for name in map.keys() {
        if !labels.emotions.iter().any(|e| e == name) {
            return Err(Error::Schema(format!("line {line}: unknown emotion '{name}'")));
        }
    }
    labels
        .emotions
        .iter()
        .map(|name| match map.get(name) {
            None => Err(Error::Schema(format!("line {line}: missing emotion '{name}'"))),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => match v.as_f64() {
                Some(x) if x == 0.0 => Ok(false),
                Some(x) if x == 1.0 => Ok(true),
                _ => Err(Error::Parse {
                    line,
                    message: format!("emotion '{name}' must be 0 or 1"),
                }),
            },
        })
        .collect::<Result<Vec<_>>>()
        .map(EmotionVector)
}

fn parse_cognitive(
    map: &BTreeMap<String, Value>,
    labels: &LabelSpace,
    line: usize,
) -> Result<CognitiveVector> {
    for name in map.keys() {
        if !labels.factors.iter().any(|f| f == name) {
            return Err(Error::Schema(format!("line {line}: unknown factor '{name}'")));
        }
    }
    labels
        .factors
        .iter()
        .map(|name| {
            let v = map
                .get(name)
                .ok_or_else(|| Error::Schema(format!("line {line}: missing factor '{name}'")))?;
            v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                line,
                message: format!("factor '{name}' must be a finite number"),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(CognitiveVector)
}

/// Parses JSONL dataset text. Blank lines are skipped; records whose text is
/// empty after normalization are dropped.
pub fn parse_dataset(content: &str, schema: Schema, labels: &LabelSpace) -> Result<LabeledDataset> {
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let id = match raw.id {
            Some(Value::String(s)) => s,
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "missing \"id\"".into(),
                })
            }
        };
        let text = raw.text.ok_or_else(|| Error::Parse {
            line: line_no,
            message: "missing \"text\"".into(),
        })?;
        let text = match ShortText::new(id, text) {
            Ok(t) => t,
            Err(Error::EmptyText) => {
                log::warn!("line {line_no}: text is empty after normalization, skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        let emotions = raw
            .emotions
            .as_ref()
            .map(|m| parse_emotions(m, labels, line_no))
            .transpose()?;
        let cognitive = raw
            .cognitive
            .as_ref()
            .map(|m| parse_cognitive(m, labels, line_no))
            .transpose()?;
        if schema.needs_emotions() && emotions.is_none() {
            return Err(Error::Parse {
                line: line_no,
                message: "missing \"emotions\"".into(),
            });
        }
        if schema.needs_cognitive() && cognitive.is_none() {
            return Err(Error::Parse {
                line: line_no,
                message: "missing \"cognitive\"".into(),
            });
        }
        records.push(Record {
            text,
            emotions,
            cognitive,
            pos: raw.pos,
        });
    }
    LabeledDataset::new(records, schema, labels.clone())
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: Schema,
    labels: &LabelSpace,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&content, schema, labels)
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    emotions: Option<BTreeMap<&'a str, u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cognitive: Option<BTreeMap<&'a str, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pos: Option<&'a [String]>,
}

/// Serializes one record in the dataset JSONL schema.
pub fn record_to_json(record: &Record, labels: &LabelSpace) -> Result<String> {
    let out = RecordOut {
        id: &record.text.id,
        text: &record.text.raw,
        emotions: record.emotions.as_ref().map(|e| {
            labels
                .emotions
                .iter()
                .map(String::as_str)
                .zip(e.as_bits())
                .collect()
        }),
        cognitive: record.cognitive.as_ref().map(|c| {
            labels
                .factors
                .iter()
                .map(String::as_str)
                .zip(c.0.iter().copied())
                .collect()
        }),
        pos: record.pos.as_deref(),
    };
    Ok(serde_json::to_string(&out)?)
}

/// Longest token count in the dataset; the fixed matrix height.
pub fn compute_gamma(ds: &LabeledDataset) -> Result<usize> {
    ds.records
        .iter()
        .map(|r| r.text.len())
        .max()
        .ok_or(Error::EmptyDataset)
}

/// Pads with [`PAD`] or keeps the first `gamma` tokens.
pub fn pad_or_truncate(tokens: &[String], gamma: usize) -> Vec<String> {
    let mut out: Vec<String> = tokens.iter().take(gamma).cloned().collect();
    out.resize(gamma, PAD.to_string());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    /// Positive labels for an emotion; annotated records for a factor.
    pub count: usize,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
}

impl SummaryRow {
    pub fn from_values(name: &str, values: &[f64], count: usize) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        // Welford accumulation
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for (i, &x) in values.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
            max = max.max(x);
            min = min.min(x);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Some(Self {
            name: name.to_string(),
            count,
            max,
            min,
            mean,
            std: (m2 / n as f64).sqrt(),
            median,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub records: usize,
    pub emotions: Vec<SummaryRow>,
    pub factors: Vec<SummaryRow>,
}

/// Per-emotion and per-factor summaries in declared label order.
pub fn dataset_stats(ds: &LabeledDataset) -> DatasetStats {
    let mut emotions = Vec::new();
    for (j, name) in ds.labels.emotions.iter().enumerate() {
        let values: Vec<f64> = ds
            .records
            .iter()
            .filter_map(|r| r.emotions.as_ref())
            .map(|e| if e.0[j] { 1.0 } else { 0.0 })
            .collect();
        let positives = values.iter().filter(|&&v| v == 1.0).count();
        emotions.extend(SummaryRow::from_values(name, &values, positives));
    }
    let mut factors = Vec::new();
    for (j, name) in ds.labels.factors.iter().enumerate() {
        let values: Vec<f64> = ds
            .records
            .iter()
            .filter_map(|r| r.cognitive.as_ref())
            .map(|c| c.0[j])
            .collect();
        factors.extend(SummaryRow::from_values(name, &values, values.len()));
    }
    DatasetStats {
        records: ds.len(),
        emotions,
        factors,
    }
}

/// Assignment of every record to one of `k_folds` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k_folds: usize,
    pub seed: u64,
    /// Record id → fold index.
    pub assignments: BTreeMap<String, usize>,
    /// Fold index per record position.
    by_position: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, position: usize) -> usize {
        self.by_position[position]
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.by_position.len())
            .filter(|&i| self.by_position[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.by_position.len())
            .filter(|&i| self.by_position[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_folds];
        for &f in &self.by_position {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin fold assignment.
pub fn kfold_split(ds: &LabeledDataset, k_folds: usize, seed: u64) -> Result<FoldPlan> {
    if k_folds < 2 {
        return Err(Error::Fold(format!("k_folds must be at least 2, got {k_folds}")));
    }
    if ds.len() < k_folds {
        return Err(Error::Fold(format!(
            "{} records cannot fill {k_folds} folds",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut by_position = vec![0; ds.len()];
    for (rank, &pos) in order.iter().enumerate() {
        by_position[pos] = rank % k_folds;
    }
    let assignments = ds
        .records
        .iter()
        .zip(&by_position)
        .map(|(r, &f)| (r.text.id.clone(), f))
        .collect();
    Ok(FoldPlan {
        k_folds,
        seed,
        assignments,
        by_position,
    })
}
