//! Classification metrics and their JSON report.

use std::fmt::Write as _;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::corpus::EmotionVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    MultiLabel,
    MultiClass,
}

/// Binary confusion counts for one emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// `num / den`, or 0 when the denominator is 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionMetrics {
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl EmotionMetrics {
    pub fn from_counts(c: Counts) -> Self {
        let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
        let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
        Self {
            counts: c,
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
            accuracy: ratio((c.tp + c.tn) as f64, c.total() as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl MacroMetrics {
    fn mean_of<'a>(rows: impl IntoIterator<Item = &'a EmotionMetrics>) -> Self {
        let rows: Vec<&EmotionMetrics> = rows.into_iter().collect();
        let n = rows.len() as f64;
        let avg = |f: fn(&EmotionMetrics) -> f64| ratio(rows.iter().map(|m| f(m)).sum(), n);
        Self {
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f1: avg(|m| m.f1),
            accuracy: avg(|m| m.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub emotions: Vec<String>,
    /// Parallel to `emotions`.
    pub per_emotion: Vec<EmotionMetrics>,
    pub macro_avg: MacroMetrics,
    /// Row-normalised, rows are true classes; empty in multi-label mode.
    pub confusion: Vec<Vec<f64>>,
    /// Raw counts behind `confusion`.
    pub confusion_counts: Vec<Vec<usize>>,
}

struct NamedRows<'a>(&'a [String], &'a [EmotionMetrics]);

impl Serialize for NamedRows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (name, row) in self.0.iter().zip(self.1) {
            map.serialize_entry(name, row)?;
        }
        map.end()
    }
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        map.serialize_entry("mode", &self.mode)?;
        map.serialize_entry("per_emotion", &NamedRows(&self.emotions, &self.per_emotion))?;
        map.serialize_entry("macro", &self.macro_avg)?;
        map.serialize_entry("confusion", &self.confusion)?;
        map.end()
    }
}

impl MetricsReport {
    fn from_counts(mode: EvalMode, emotions: &[String], counts: &[Counts], confusion_counts: Vec<Vec<usize>>) -> Self {
        let per_emotion: Vec<EmotionMetrics> = counts.iter().map(|&c| EmotionMetrics::from_counts(c)).collect();
        Self {
            mode,
            emotions: emotions.to_vec(),
            macro_avg: MacroMetrics::mean_of(&per_emotion),
            per_emotion,
            confusion: normalize_rows(&confusion_counts),
            confusion_counts,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Plain-text table of the per-emotion and macro figures.
    pub fn to_table(&self) -> String {
        let width = self.emotions.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>5} {:>5} {:>5} {:>5}  {:>9} {:>6} {:>6} {:>8}",
            "label", "tp", "fp", "tn", "fn", "precision", "recall", "f1", "accuracy"
        );
        for (name, m) in self.emotions.iter().zip(&self.per_emotion) {
            let c = m.counts;
            let _ = writeln!(
                out,
                "{name:<width$}  {:>5} {:>5} {:>5} {:>5}  {:>9.4} {:>6.4} {:>6.4} {:>8.4}",
                c.tp, c.fp, c.tn, c.fn_, m.precision, m.recall, m.f1, m.accuracy
            );
        }
        let a = &self.macro_avg;
        let _ = writeln!(
            out,
            "{:<width$}  {:>23}  {:>9.4} {:>6.4} {:>6.4} {:>8.4}",
            "macro", "", a.precision, a.recall, a.f1, a.accuracy
        );
        if !self.confusion.is_empty() {
            let _ = writeln!(out, "\nconfusion (rows = true, columns = predicted)");
            let _ = write!(out, "{:<width$}", "");
            for name in &self.emotions {
                let _ = write!(out, " {name:>width$}");
            }
            out.push('\n');
            for (name, row) in self.emotions.iter().zip(&self.confusion) {
                let _ = write!(out, "{name:<width$}");
                for v in row {
                    let _ = write!(out, " {v:>width$.3}");
                }
                out.push('\n');
            }
        }
        out
    }
}

fn normalize_rows(counts: &[Vec<usize>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter().map(|&c| ratio(c as f64, total as f64)).collect()
        })
        .collect()
}

/// Per-emotion metrics for multi-label predictions.
pub fn compute_metrics(pred: &[EmotionVector], truth: &[EmotionVector], emotions: &[String]) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labelled texts",
            pred.len(),
            truth.len()
        )));
    }
    let k = emotions.len();
    if let Some(bad) = pred.iter().chain(truth).find(|v| v.len() != k) {
        return Err(Error::shape(format!("label vector of length {}, expected {k}", bad.len())));
    }
    let mut counts = vec![Counts::default(); k];
    for (p, t) in pred.iter().zip(truth) {
        for (j, c) in counts.iter_mut().enumerate() {
            c.add(p.0[j], t.0[j]);
        }
    }
    Ok(MetricsReport::from_counts(EvalMode::MultiLabel, emotions, &counts, Vec::new()))
}

/// Raw `k × k` counts, rows are true classes.
pub fn confusion_counts(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::shape("prediction and truth lengths differ"));
    }
    let mut m = vec![vec![0; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::shape(format!("class index out of range for {k} classes")));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Row-normalised confusion matrix; a class that never occurs gets a zero row.
pub fn confusion(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<f64>>> {
    Ok(normalize_rows(&confusion_counts(pred, truth, k)?))
}

/// One-vs-rest metrics plus the confusion matrix for single-label predictions.
pub fn compute_multiclass(pred: &[usize], truth: &[usize], emotions: &[String]) -> Result<MetricsReport> {
    let k = emotions.len();
    let cm = confusion_counts(pred, truth, k)?;
    let mut counts = vec![Counts::default(); k];
    for (&p, &t) in pred.iter().zip(truth) {
        for (j, c) in counts.iter_mut().enumerate() {
            c.add(p == j, t == j);
        }
    }
    Ok(MetricsReport::from_counts(EvalMode::MultiClass, emotions, &counts, cm))
}

/// Mean of per-fold metrics; counts and confusion counts are pooled.
pub fn average_reports(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let first = reports.first().ok_or_else(|| Error::Config("no reports to average".into()))?;
    if reports
        .iter()
        .any(|r| r.mode != first.mode || r.emotions != first.emotions)
    {
        return Err(Error::shape("reports disagree on mode or labels"));
    }
    let n = reports.len() as f64;
    let k = first.emotions.len();
    let per_emotion: Vec<EmotionMetrics> = (0..k)
        .map(|j| {
            let mut counts = Counts::default();
            let (mut p, mut r, mut f, mut a) = (0.0, 0.0, 0.0, 0.0);
            for rep in reports {
                let m = &rep.per_emotion[j];
                counts.tp += m.counts.tp;
                counts.fp += m.counts.fp;
                counts.tn += m.counts.tn;
                counts.fn_ += m.counts.fn_;
                p += m.precision;
                r += m.recall;
                f += m.f1;
                a += m.accuracy;
            }
            EmotionMetrics {
                counts,
                precision: p / n,
                recall: r / n,
                f1: f / n,
                accuracy: a / n,
            }
        })
        .collect();
    let mean = |g: fn(&MacroMetrics) -> f64| reports.iter().map(|r| g(&r.macro_avg)).sum::<f64>() / n;
    let macro_avg = MacroMetrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        accuracy: mean(|m| m.accuracy),
    };
    let confusion_counts = if first.confusion_counts.is_empty() {
        Vec::new()
    } else {
        let mut sum = vec![vec![0; k]; k];
        for rep in reports {
            for (srow, row) in sum.iter_mut().zip(&rep.confusion_counts) {
                for (s, &c) in srow.iter_mut().zip(row) {
                    *s += c;
                }
            }
        }
        sum
    };
    Ok(MetricsReport {
        mode: first.mode,
        emotions: first.emotions.clone(),
        per_emotion,
        macro_avg,
        confusion: normalize_rows(&confusion_counts),
        confusion_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("e{i}")).collect()
    }

    fn ev(bits: &[u8]) -> EmotionVector {
        EmotionVector(bits.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn perfect_predictions() {
        let t = vec![ev(&[1, 0]), ev(&[0, 1]), ev(&[1, 1])];
        let r = compute_metrics(&t, &t, &names(2)).unwrap();
        for m in &r.per_emotion {
            assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn one_of_each_outcome() {
        let pred = vec![ev(&[1]), ev(&[1]), ev(&[0]), ev(&[0])];
        let truth = vec![ev(&[1]), ev(&[0]), ev(&[1]), ev(&[0])];
        let m = &compute_metrics(&pred, &truth, &names(1)).unwrap().per_emotion[0];
        assert_eq!(m.counts, Counts { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn all_negative_uses_zero_convention() {
        let v = vec![ev(&[0]); 5];
        let m = &compute_metrics(&v, &v, &names(1)).unwrap().per_emotion[0];
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn length_mismatch_is_a_shape_error() {
        assert!(matches!(
            compute_metrics(&[ev(&[1])], &[], &names(1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn confusion_examples() {
        let id = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(id, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let c = confusion(&[0, 0, 0, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(c[0], vec![0.75, 0.25]);
        assert_eq!(c[1], vec![0.0, 0.0]);
    }

    #[test]
    fn report_json_shape() {
        let r = compute_multiclass(&[0, 1, 1], &[0, 1, 0], &["joy".into(), "fear".into()]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["mode"], "multi-class");
        let keys: Vec<&String> = v["per_emotion"].as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 2);
        assert_eq!(v["per_emotion"]["fear"]["tp"], 1);
        assert_eq!(v["per_emotion"]["joy"]["fn"], 1);
        assert!(v["macro"]["f1"].is_number());
        assert_eq!(v["confusion"][0][1], 0.5);
        assert!(r.to_table().contains("macro"));
    }

    #[test]
    fn averaging_is_the_fold_mean() {
        let e = names(1);
        let a = compute_metrics(&[ev(&[1]), ev(&[1])], &[ev(&[1]), ev(&[0])], &e).unwrap();
        let b = compute_metrics(&[ev(&[0]), ev(&[1])], &[ev(&[1]), ev(&[1])], &e).unwrap();
        let avg = average_reports(&[a.clone(), b.clone()]).unwrap();
        let m = &avg.per_emotion[0];
        assert_eq!(m.precision, (a.per_emotion[0].precision + b.per_emotion[0].precision) / 2.0);
        assert_eq!(avg.macro_avg.f1, (a.macro_avg.f1 + b.macro_avg.f1) / 2.0);
        assert_eq!(m.counts.total(), 4);
    }

    fn naive(pred: &[Vec<bool>], truth: &[Vec<bool>], j: usize) -> (f64, f64, f64, f64) {
        let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..pred.len() {
            if pred[i][j] && truth[i][j] {
                tp += 1.0;
            } else if pred[i][j] {
                fp += 1.0;
            } else if truth[i][j] {
                fn_ += 1.0;
            } else {
                tn += 1.0;
            }
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        (p, r, f, (tp + tn) / (tp + fp + tn + fn_))
    }

    proptest! {
        #[test]
        fn agrees_with_naive_counting(pairs in prop::collection::vec((prop::collection::vec(any::<bool>(), 3), prop::collection::vec(any::<bool>(), 3)), 1..40)) {
            let pred: Vec<Vec<bool>> = pairs.iter().map(|p| p.0.clone()).collect();
            let truth: Vec<Vec<bool>> = pairs.iter().map(|p| p.1.clone()).collect();
            let r = compute_metrics(
                &pred.iter().cloned().map(EmotionVector).collect::<Vec<_>>(),
                &truth.iter().cloned().map(EmotionVector).collect::<Vec<_>>(),
                &names(3),
            ).unwrap();
            for j in 0..3 {
                let m = &r.per_emotion[j];
                let (p, rc, f, a) = naive(&pred, &truth, j);
                prop_assert!((m.precision - p).abs() < 1e-12);
                prop_assert!((m.recall - rc).abs() < 1e-12);
                prop_assert!((m.f1 - f).abs() < 1e-12);
                prop_assert!((m.accuracy - a).abs() < 1e-12);
                for v in [m.precision, m.recall, m.f1, m.accuracy] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn confusion_rows_sum_to_one(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let c = confusion(&pred, &truth, 4).unwrap();
            for (t, row) in c.iter().enumerate() {
                if truth.contains(&t) {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
