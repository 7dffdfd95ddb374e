//! Entropy-minimizing thresholds per cognitive factor and the low/high
//! cognitive categories they induce.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{CognitiveVector, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Binary class of a text for one factor (k₁ = low, k₂ = high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorClass {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorClassLabels(pub Vec<FactorClass>);

impl FactorClassLabels {
    /// Median split: values at or above the median are `High`.
    pub fn median_split<S: Scalar>(values: &[S]) -> Self {
        if values.is_empty() {
            return Self(Vec::new());
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite factor values"));
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / S::lit(2.0)
        };
        Self(
            values
                .iter()
                .map(|&v| if v >= median { FactorClass::High } else { FactorClass::Low })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Binary Shannon entropy (bits) from class counts; `0 log 0 = 0`.
pub fn entropy_from_counts<S: Scalar>(low: usize, high: usize) -> S {
    let total = low + high;
    if total == 0 {
        return S::zero();
    }
    let n = S::lit(total as f64);
    [low, high]
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = S::lit(c as f64) / n;
            -p * p.log2()
        })
        .sum()
}

/// Entropy of a subset given its class labels; empty subsets have 0.
pub fn subset_entropy<S: Scalar>(classes: impl IntoIterator<Item = FactorClass>) -> S {
    let (mut low, mut high) = (0, 0);
    for c in classes {
        match c {
            FactorClass::Low => low += 1,
            FactorClass::High => high += 1,
        }
    }
    entropy_from_counts(low, high)
}

fn weighted_split_entropy<S: Scalar>(left: (usize, usize), right: (usize, usize)) -> S {
    let n_left = left.0 + left.1;
    let n_right = right.0 + right.1;
    let n = S::lit((n_left + n_right) as f64);
    S::lit(n_left as f64) / n * entropy_from_counts::<S>(left.0, left.1)
        + S::lit(n_right as f64) / n * entropy_from_counts::<S>(right.0, right.1)
}

/// Class information entropy of splitting `values` at `t` into
/// `{v < t}` and `{v ≥ t}`.
pub fn class_information_entropy<S: Scalar>(
    values: &[S],
    labels: &FactorClassLabels,
    t: S,
) -> S {
    let mut left = (0, 0);
    let mut right = (0, 0);
    for (&v, &c) in values.iter().zip(&labels.0) {
        let side = if v < t { &mut left } else { &mut right };
        match c {
            FactorClass::Low => side.0 += 1,
            FactorClass::High => side.1 += 1,
        }
    }
    if left.0 + left.1 + right.0 + right.1 == 0 {
        return S::zero();
    }
    weighted_split_entropy(left, right)
}

/// Midpoints between consecutive sorted distinct values.
pub fn candidate_thresholds<S: Scalar>(values: &[S]) -> Vec<S> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite factor values"));
    sorted.dedup();
    sorted
        .windows(2)
        .map(|w| (w[0] + w[1]) / S::lit(2.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch<S> {
    pub alpha: S,
    pub entropy: S,
    /// `(T, E(T))` for every candidate, ascending in `T`.
    pub candidates: Vec<(S, S)>,
}

/// Entropy-minimizing threshold over the midpoint candidates; ties go to
/// the smallest threshold.
///
/// Sweeps the sorted values once, so the cost is `O(n log n)`.
pub fn find_threshold<S: Scalar>(
    values: &[S],
    labels: &FactorClassLabels,
    factor: usize,
) -> Result<ThresholdSearch<S>> {
    if values.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} values but {} class labels",
            values.len(),
            labels.len()
        )));
    }
    let mut pairs: Vec<(S, FactorClass)> = values.iter().copied().zip(labels.0.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite factor values"));
    let total = pairs.iter().fold((0, 0), |acc, p| match p.1 {
        FactorClass::Low => (acc.0 + 1, acc.1),
        FactorClass::High => (acc.0, acc.1 + 1),
    });

    let mut left = (0usize, 0usize);
    let mut candidates = Vec::new();
    let mut best: Option<(S, S)> = None;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            match pairs[i].1 {
                FactorClass::Low => left.0 += 1,
                FactorClass::High => left.1 += 1,
            }
            i += 1;
        }
        if i == pairs.len() {
            break;
        }
        let t = (v + pairs[i].0) / S::lit(2.0);
        let right = (total.0 - left.0, total.1 - left.1);
        let e = weighted_split_entropy::<S>(left, right);
        candidates.push((t, e));
        if best.is_none_or(|(_, be)| e < be) {
            best = Some((t, e));
        }
    }
    let (alpha, entropy) = best.ok_or(Error::DegenerateFactor { factor })?;
    Ok(ThresholdSearch {
        alpha,
        entropy,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector<S> {
    pub alphas: Vec<S>,
    pub candidate_log: Vec<Vec<(S, S)>>,
}

impl<S: Scalar> ThresholdVector<S> {
    pub fn from_alphas(alphas: Vec<S>) -> Self {
        let q = alphas.len();
        Self {
            alphas,
            candidate_log: vec![Vec::new(); q],
        }
    }

    pub fn q(&self) -> usize {
        self.alphas.len()
    }
}

/// Fits one threshold per factor on a cognitive-annotated dataset.
///
/// `classes` supplies explicit low/high labels per factor; otherwise each
/// factor is median-split.
pub fn fit_thresholds<S: Scalar>(
    dp: &LabeledDataset,
    classes: Option<&[FactorClassLabels]>,
) -> Result<ThresholdVector<S>> {
    let q = dp.labels.q();
    let mut alphas = Vec::with_capacity(q);
    let mut log = Vec::with_capacity(q);
    for j in 0..q {
        let values: Vec<S> = dp
            .factor_values(j)
            .ok_or_else(|| Error::Schema("threshold data lacks cognitive vectors".into()))?
            .into_iter()
            .map(S::lit)
            .collect();
        let labels = match classes {
            Some(c) => c
                .get(j)
                .cloned()
                .ok_or_else(|| Error::Config(format!("no class labels for factor {j}")))?,
            None => FactorClassLabels::median_split(&values),
        };
        let search = find_threshold(&values, &labels, j)?;
        alphas.push(search.alpha);
        log.push(search.candidates);
    }
    Ok(ThresholdVector {
        alphas,
        candidate_log: log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CognitiveCategory {
    /// One-based category index `i ∈ 1..=2q`.
    pub index: usize,
    /// Zero-based factor index (`⌊(i+1)/2⌋ − 1`).
    pub factor: usize,
    pub side: Side,
    /// Record positions in the dataset the category was built from.
    pub members: Vec<usize>,
}

impl CognitiveCategory {
    pub fn index_for(factor: usize, side: Side) -> usize {
        match side {
            Side::Low => 2 * factor + 1,
            Side::High => 2 * factor + 2,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Side of `alpha` a factor value falls on (`≥` goes high).
pub fn side_of<S: Scalar>(value: S, alpha: S) -> Side {
    if value < alpha {
        Side::Low
    } else {
        Side::High
    }
}

/// Builds the `2q` categories without checking for empties.
pub fn categorize_unchecked<S: Scalar>(
    cognitive: &[CognitiveVector],
    alphas: &ThresholdVector<S>,
) -> Result<Vec<CognitiveCategory>> {
    let q = alphas.q();
    let mut cats: Vec<CognitiveCategory> = (0..q)
        .flat_map(|j| {
            [Side::Low, Side::High].map(|side| CognitiveCategory {
                index: CognitiveCategory::index_for(j, side),
                factor: j,
                side,
                members: Vec::new(),
            })
        })
        .collect();
    for (pos, cv) in cognitive.iter().enumerate() {
        if cv.len() != q {
            return Err(Error::shape(format!(
                "record {pos} has {} factor scores, thresholds cover {q}",
                cv.len()
            )));
        }
        for (j, (&f, &alpha)) in cv.0.iter().zip(&alphas.alphas).enumerate() {
            let i = CognitiveCategory::index_for(j, side_of(S::lit(f), alpha));
            cats[i - 1].members.push(pos);
        }
    }
    Ok(cats)
}

/// Splits an annotated dataset into `2q` non-empty categories.
pub fn categorize<S: Scalar>(
    de: &LabeledDataset,
    alphas: &ThresholdVector<S>,
) -> Result<Vec<CognitiveCategory>> {
    let cognitive: Vec<CognitiveVector> = de
        .records
        .iter()
        .map(|r| r.cognitive.clone())
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Schema("every record needs a cognitive vector".into()))?;
    let cats = categorize_unchecked(&cognitive, alphas)?;
    if let Some(empty) = cats.iter().find(|c| c.is_empty()) {
        return Err(Error::Lemma1Violation {
            category: empty.index,
        });
    }
    Ok(cats)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// Every category non-empty.
    pub non_empty: bool,
    /// Union of categories covers the dataset.
    pub covers_dataset: bool,
    /// Low/high pair of each factor disjoint.
    pub pairs_disjoint: bool,
    /// Members lie on their category's side of the threshold.
    pub sides_consistent: bool,
    pub failures: Vec<String>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.non_empty && self.covers_dataset && self.pairs_disjoint && self.sides_consistent
    }
}

/// Checks the four structural properties of a category set.
pub fn validate_categories<S: Scalar>(
    cats: &[CognitiveCategory],
    cognitive: &[CognitiveVector],
    alphas: &ThresholdVector<S>,
) -> LemmaReport {
    let mut failures = Vec::new();

    let non_empty = cats.iter().all(|c| !c.is_empty());
    for c in cats.iter().filter(|c| c.is_empty()) {
        failures.push(format!("c{} is empty", c.index));
    }

    let union: BTreeSet<usize> = cats.iter().flat_map(|c| c.members.iter().copied()).collect();
    let covers_dataset = union.len() == cognitive.len() && union.iter().all(|&p| p < cognitive.len());
    if !covers_dataset {
        failures.push(format!(
            "categories cover {} of {} records",
            union.len(),
            cognitive.len()
        ));
    }

    let mut pairs_disjoint = true;
    for j in 0..alphas.q() {
        let low: BTreeSet<usize> = cats
            .iter()
            .filter(|c| c.factor == j && c.side == Side::Low)
            .flat_map(|c| c.members.iter().copied())
            .collect();
        let shared = cats
            .iter()
            .filter(|c| c.factor == j && c.side == Side::High)
            .flat_map(|c| c.members.iter())
            .filter(|m| low.contains(m))
            .count();
        if shared > 0 {
            pairs_disjoint = false;
            failures.push(format!("factor {j}: {shared} records in both low and high"));
        }
    }

    let mut sides_consistent = true;
    for c in cats {
        let Some(&alpha) = alphas.alphas.get(c.factor) else {
            sides_consistent = false;
            failures.push(format!("c{} refers to unknown factor {}", c.index, c.factor));
            continue;
        };
        for &m in &c.members {
            let ok = cognitive
                .get(m)
                .and_then(|cv| cv.0.get(c.factor))
                .is_some_and(|&f| side_of(S::lit(f), alpha) == c.side);
            if !ok {
                sides_consistent = false;
                failures.push(format!("c{}: record {m} is on the wrong side", c.index));
            }
        }
    }

    LemmaReport {
        non_empty,
        covers_dataset,
        pairs_disjoint,
        sides_consistent,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use FactorClass::{High as K2, Low as K1};

    fn labels(c: &[FactorClass]) -> FactorClassLabels {
        FactorClassLabels(c.to_vec())
    }

    #[test]
    fn subset_entropy_examples() {
        assert_eq!(subset_entropy::<f64>([K1, K1, K2, K2]), 1.0);
        assert_eq!(subset_entropy::<f64>([K1, K1, K1, K1]), 0.0);
        // −(¾ log₂ ¾ + ¼ log₂ ¼)
        let e: f64 = subset_entropy([K1, K1, K1, K2]);
        assert!((e - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert!((e - 0.8113).abs() < 1e-4);
        assert_eq!(subset_entropy::<f64>([]), 0.0);
    }

    #[test]
    fn class_information_entropy_examples() {
        // 4/4 split, left balanced, right pure
        let values = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0];
        let l = labels(&[K1, K1, K2, K2, K2, K2, K2, K2]);
        assert_eq!(class_information_entropy(&values, &l, 1.5), 0.5);
        // threshold below every value
        let whole: f64 = subset_entropy(l.0.iter().copied());
        assert_eq!(class_information_entropy(&values, &l, 0.0), whole);
        let v = [1.0, 1.0, 2.0, 2.0];
        assert_eq!(class_information_entropy(&v, &labels(&[K1, K1, K2, K2]), 1.5), 0.0);
    }

    #[test]
    fn find_threshold_examples() {
        let s = find_threshold(&[1.0, 1.0, 2.0, 2.0], &labels(&[K1, K1, K2, K2]), 0).unwrap();
        assert_eq!((s.alpha, s.entropy), (1.5, 0.0));

        let s = find_threshold(&[3.0, 5.0], &labels(&[K1, K2]), 0).unwrap();
        assert_eq!(s.alpha, 4.0);

        let v = [1.0, 2.0, 3.0, 4.0];
        let l = labels(&[K1, K2, K1, K2]);
        let s = find_threshold(&v, &l, 0).unwrap();
        let scan = [1.5, 2.5, 3.5]
            .iter()
            .map(|&t| (t, class_information_entropy(&v, &l, t)))
            .fold((f64::NAN, f64::INFINITY), |b, (t, e)| if e < b.1 { (t, e) } else { b });
        assert_eq!(s.alpha, scan.0);
        assert_eq!(s.entropy, scan.1);
    }

    #[test]
    fn constant_factor_is_degenerate() {
        assert!(matches!(
            find_threshold(&[2.0, 2.0, 2.0], &labels(&[K2, K2, K2]), 3),
            Err(Error::DegenerateFactor { factor: 3 })
        ));
    }

    #[test]
    fn median_split_classes() {
        let l = FactorClassLabels::median_split(&[1.0, 4.0, 2.0, 3.0]);
        assert_eq!(l.0, vec![K1, K2, K1, K2]);
    }

    fn cvs(rows: &[&[f64]]) -> Vec<CognitiveVector> {
        rows.iter().map(|r| CognitiveVector(r.to_vec())).collect()
    }

    #[test]
    fn boundary_goes_high() {
        let cog = cvs(&[&[2.9], &[3.0], &[3.5]]);
        let cats = categorize_unchecked(&cog, &ThresholdVector::from_alphas(vec![3.0])).unwrap();
        assert_eq!(cats[0].members, vec![0]);
        assert_eq!(cats[1].members, vec![1, 2]);
        assert_eq!((cats[1].index, cats[1].side), (2, Side::High));
    }

    #[test]
    fn pairing_and_cover() {
        let cog = cvs(&[&[1.0, 5.0], &[2.0, 4.0], &[3.0, 3.0], &[4.0, 2.0]]);
        let alphas = ThresholdVector::from_alphas(vec![2.5, 3.5]);
        let cats = categorize_unchecked(&cog, &alphas).unwrap();
        for r in 0..4 {
            assert_eq!(cats[..2].iter().filter(|c| c.members.contains(&r)).count(), 1);
            assert_eq!(cats[2..].iter().filter(|c| c.members.contains(&r)).count(), 1);
        }
        assert!(validate_categories(&cats, &cog, &alphas).all_pass());
    }

    #[test]
    fn lemma_checks_flag_bad_fixtures() {
        let cog = cvs(&[&[1.0], &[5.0]]);
        let alphas = ThresholdVector::from_alphas(vec![3.0]);
        let mut cats = categorize_unchecked(&cog, &alphas).unwrap();
        assert!(validate_categories(&cats, &cog, &alphas).all_pass());

        // wrong-side member
        cats[0].members.push(1);
        let r = validate_categories(&cats, &cog, &alphas);
        assert!(!r.sides_consistent);
        assert!(!r.pairs_disjoint);

        // empty category
        let cats = categorize_unchecked(&cvs(&[&[5.0]]), &alphas).unwrap();
        let r = validate_categories(&cats, &cvs(&[&[5.0]]), &alphas);
        assert!(!r.non_empty);
        assert!(r.covers_dataset);

        // missing coverage
        let mut cats = categorize_unchecked(&cog, &alphas).unwrap();
        cats[1].members.clear();
        assert!(!validate_categories(&cats, &cog, &alphas).covers_dataset);
    }

    proptest! {
        #[test]
        fn binary_entropy_bounds(low in 0usize..50, high in 0usize..50) {
            let e: f64 = entropy_from_counts(low, high);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
            if low + high > 0 {
                prop_assert_eq!(e == 0.0, low == 0 || high == 0);
                prop_assert_eq!((e - 1.0).abs() < 1e-12, low == high);
            }
        }

        #[test]
        fn membership_depends_only_on_own_factor(
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, 3), 1..30),
            row in 0usize..30, other in 0.0f64..5.0,
        ) {
            let cog: Vec<CognitiveVector> = rows.iter().cloned().map(CognitiveVector).collect();
            let alphas = ThresholdVector::from_alphas(vec![2.5, 2.5, 2.5]);
            let before = categorize_unchecked(&cog, &alphas).unwrap();
            let mut changed = cog.clone();
            let r = row % cog.len();
            changed[r].0[1] = other;
            let after = categorize_unchecked(&changed, &alphas).unwrap();
            for j in [0usize, 2] {
                prop_assert_eq!(&before[2 * j].members, &after[2 * j].members);
                prop_assert_eq!(&before[2 * j + 1].members, &after[2 * j + 1].members);
            }
        }
    }
}
