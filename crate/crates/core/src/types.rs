//! Shared domain types: label spaces, probability vectors, score tables and
//! confusion matrices.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for a probability vector's sum on construction.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Rows whose sum deviates from 1 by at most this much are renormalized on
/// ingestion instead of rejected.
pub const INGEST_RENORM_TOL: f64 = 1e-3;

/// Ordered, duplicate-free list of class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    classes: Vec<String>,
}

impl LabelSpace {
    pub fn new<I, S>(classes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.is_empty() {
            return Err(Error::Validation("label space is empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if c.is_empty() {
                return Err(Error::Validation("empty class name".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Validation(format!("duplicate class name {c:?}")));
            }
        }
        Ok(Self { classes })
    }

    /// The two-class space of the tumor detection dataset.
    pub fn binary_detection() -> Self {
        Self::new(["no", "yes"]).expect("static label space")
    }

    /// The four-class space of the tumor type dataset.
    pub fn tumor_types() -> Self {
        Self::new(["glioma", "meningioma", "pituitary", "no_tumor"]).expect("static label space")
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

impl TryFrom<Vec<String>> for LabelSpace {
    type Error = Error;

    fn try_from(value: Vec<String>) -> Result<Self> {
        LabelSpace::new(value)
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(value: LabelSpace) -> Self {
        value.classes
    }
}

/// How to pick among equally scored candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum TiePolicy {
    /// First candidate in index order.
    #[default]
    LowestIndex,
    /// Uniformly random candidate, drawn from a generator seeded per call.
    Random(u64),
}

impl TiePolicy {
    /// Resolve a non-empty, ascending list of tied candidate indices.
    pub fn pick(&self, candidates: &[usize]) -> usize {
        match *self {
            TiePolicy::LowestIndex => candidates[0],
            TiePolicy::Random(seed) => {
                if candidates.len() == 1 {
                    candidates[0]
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    candidates[rng.gen_range(0..candidates.len())]
                }
            }
        }
    }
}

/// Index of the maximal entry, ties resolved by `policy`. Panics on an empty
/// slice.
pub fn argmax_index(scores: &[f64], policy: TiePolicy) -> usize {
    assert!(!scores.is_empty(), "argmax of an empty slice");
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == best)
        .map(|(i, _)| i)
        .collect();
    policy.pick(&tied)
}

/// Per-class probability distribution from one classifier for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validate that every score lies in [0, 1] and the sum is within
    /// [`PROB_SUM_TOL`] of 1.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Validation("probability vector is empty".into()));
        }
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("score {i} is {s}")));
            }
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Validation(format!("score {i} = {s} outside [0, 1]")));
            }
        }
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Validation(format!("scores sum to {sum}, not 1")));
        }
        Ok(Self(scores))
    }

    /// Apply the ingestion policy: exact-enough rows pass through, rows within
    /// [`INGEST_RENORM_TOL`] are renormalized, anything else is rejected.
    /// Returns the vector and whether it was renormalized.
    pub fn ingest(scores: Vec<f64>) -> Result<(Self, bool)> {
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("score {i} is {s}")));
            }
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Validation(format!("score {i} = {s} outside [0, 1]")));
            }
        }
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() <= PROB_SUM_TOL {
            return Self::new(scores).map(|p| (p, false));
        }
        if (sum - 1.0).abs() <= INGEST_RENORM_TOL {
            return renormalize(&scores).map(|p| (p, true));
        }
        Err(Error::Validation(format!(
            "scores sum to {sum}, beyond the renormalization tolerance"
        )))
    }

    /// Uniform distribution over `k` classes.
    pub fn uniform(k: usize) -> Self {
        assert!(k > 0);
        Self(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        Self(v)
    }

    /// Wrap scores produced by an internal computation known to be a
    /// distribution (softmax, convex combination). Checked in debug builds.
    pub(crate) fn from_computed(scores: Vec<f64>) -> Self {
        debug_assert!(Self::new(scores.clone()).is_ok(), "invalid computed distribution {scores:?}");
        Self(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self, policy: TiePolicy) -> usize {
        argmax_index(&self.0, policy)
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        ProbVector::new(value)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(value: ProbVector) -> Self {
        value.0
    }
}

/// Scale nonnegative scores so they sum to 1.
///
/// Inputs already summing to 1 within 1e-12 (and bounded by 1) are returned
/// unchanged, which makes the operation exactly idempotent.
pub fn renormalize(raw: &[f64]) -> Result<ProbVector> {
    if raw.is_empty() {
        return Err(Error::AllZero);
    }
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("score {index} is {value}")));
        }
        if value < 0.0 {
            return Err(Error::NegativeScore { index, value });
        }
    }
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        return Err(Error::AllZero);
    }
    if (sum - 1.0).abs() <= 1e-12 && raw.iter().all(|&v| v <= 1.0) {
        return Ok(ProbVector(raw.to_vec()));
    }
    Ok(ProbVector(raw.iter().map(|&v| v / sum).collect()))
}

/// Class name of the highest score.
pub fn argmax_class<'a>(p: &ProbVector, labels: &'a LabelSpace, policy: TiePolicy) -> &'a str {
    labels.name(p.argmax(policy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub probs: ProbVector,
    /// Index into the table's label space.
    pub true_label: Option<usize>,
}

/// Per-sample class probabilities emitted by one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    label_space: LabelSpace,
    model_id: String,
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(label_space: LabelSpace, model_id: impl Into<String>, rows: Vec<ScoreRow>) -> Result<Self> {
        let k = label_space.len();
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.sample_id.is_empty() {
                return Err(Error::Validation("empty sample_id".into()));
            }
            if !seen.insert(row.sample_id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample_id {:?}", row.sample_id)));
            }
            if row.probs.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: row.probs.len(),
                });
            }
            if let Some(l) = row.true_label {
                if l >= k {
                    return Err(Error::Validation(format!(
                        "label index {l} out of range for sample {:?}",
                        row.sample_id
                    )));
                }
            }
        }
        Ok(Self {
            label_space,
            model_id: model_id.into(),
            rows,
        })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True labels of every row, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| r.true_label.ok_or_else(|| Error::MissingLabels(r.sample_id.clone())))
            .collect()
    }

    pub fn row(&self, sample_id: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.sample_id == sample_id)
    }
}

/// Check that tables share a label space and list the same samples in the
/// same order.
pub fn ensure_aligned(tables: &[ScoreTable]) -> Result<()> {
    let Some(first) = tables.first() else {
        return Err(Error::EmptyInput);
    };
    for t in &tables[1..] {
        if t.label_space() != first.label_space() {
            return Err(Error::LabelMismatch(format!(
                "model {:?} vs {:?}",
                t.model_id(),
                first.model_id()
            )));
        }
        if t.len() != first.len() {
            return Err(Error::Misaligned(format!(
                "model {:?} has {} rows, {:?} has {}",
                t.model_id(),
                t.len(),
                first.model_id(),
                first.len()
            )));
        }
        for (a, b) in first.rows().iter().zip(t.rows()) {
            if a.sample_id != b.sample_id {
                return Err(Error::Misaligned(format!(
                    "sample {:?} vs {:?}",
                    a.sample_id, b.sample_id
                )));
            }
        }
    }
    Ok(())
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    label_space: LabelSpace,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(label_space: LabelSpace) -> Self {
        let k = label_space.len();
        Self {
            label_space,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(label_space: LabelSpace, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = label_space.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: counts.len(),
            });
        }
        Ok(Self { label_space, counts })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renormalize_examples() {
        assert_eq!(renormalize(&[0.2, 0.2]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(
            renormalize(&[1.0, 0.0, 0.0, 0.0]).unwrap().as_slice(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let p = renormalize(&[2.0, 3.0, 5.0]).unwrap();
        for (a, b) in p.as_slice().iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn renormalize_errors() {
        assert!(matches!(renormalize(&[0.0, 0.0]), Err(Error::AllZero)));
        assert!(matches!(
            renormalize(&[0.5, -0.1]),
            Err(Error::NegativeScore { index: 1, .. })
        ));
    }

    #[test]
    fn argmax_examples() {
        let abc = LabelSpace::new(["a", "b", "c"]).unwrap();
        let p = ProbVector::new(vec![0.1, 0.7, 0.2]).unwrap();
        assert_eq!(argmax_class(&p, &abc, TiePolicy::default()), "b");

        let ab = LabelSpace::new(["a", "b"]).unwrap();
        let p = ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_class(&p, &ab, TiePolicy::default()), "a");

        let four = LabelSpace::tumor_types();
        assert_eq!(
            argmax_class(&ProbVector::uniform(4), &four, TiePolicy::default()),
            "glioma"
        );
    }

    #[test]
    fn random_tie_policy_is_seeded_and_stays_among_candidates() {
        let scores = [0.25, 0.25, 0.25, 0.25];
        let picks: HashSet<usize> = (0..64).map(|s| argmax_index(&scores, TiePolicy::Random(s))).collect();
        assert!(picks.len() > 1);
        for s in 0..16 {
            assert_eq!(
                argmax_index(&scores, TiePolicy::Random(s)),
                argmax_index(&scores, TiePolicy::Random(s))
            );
        }
        // a unique maximum is never overridden
        assert_eq!(argmax_index(&[0.1, 0.6, 0.3], TiePolicy::Random(9)), 1);
    }

    #[test]
    fn label_space_rejects_duplicates_and_empty() {
        assert!(LabelSpace::new(Vec::<String>::new()).is_err());
        assert!(LabelSpace::new(["a", "a"]).is_err());
    }

    #[test]
    fn ingestion_policy() {
        let (p, renorm) = ProbVector::ingest(vec![0.5004, 0.5]).unwrap();
        assert!(renorm);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(ProbVector::ingest(vec![0.6, 0.5]).is_err());
        assert!(ProbVector::ingest(vec![1.1, -0.1]).is_err());
        let (_, renorm) = ProbVector::ingest(vec![0.25, 0.75]).unwrap();
        assert!(!renorm);
    }

    #[test]
    fn score_table_invariants() {
        let ls = LabelSpace::binary_detection();
        let row = |id: &str, l| ScoreRow {
            sample_id: id.into(),
            probs: ProbVector::uniform(2),
            true_label: l,
        };
        assert!(ScoreTable::new(ls.clone(), "m", vec![row("a", Some(0)), row("a", None)]).is_err());
        assert!(ScoreTable::new(ls.clone(), "m", vec![row("a", Some(2))]).is_err());
        let t = ScoreTable::new(ls, "m", vec![row("a", Some(1)), row("b", None)]).unwrap();
        assert!(matches!(t.labels(), Err(Error::MissingLabels(id)) if id == "b"));
    }

    proptest! {
        #[test]
        fn renormalize_is_idempotent(raw in prop::collection::vec(0.0f64..10.0, 1..8)) {
            prop_assume!(raw.iter().any(|&v| v > 0.0));
            let once = renormalize(&raw).unwrap();
            let twice = renormalize(once.as_slice()).unwrap();
            prop_assert_eq!(once.as_slice(), twice.as_slice());
            prop_assert!((once.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn argmax_is_scale_invariant(raw in prop::collection::vec(0.0f64..1.0, 1..8), c in 1e-3f64..1e3) {
            let scaled: Vec<f64> = raw.iter().map(|v| v * c).collect();
            // scaling can merge near-equal floats; only compare when the
            // ordering of the top two survives
            let a = argmax_index(&raw, TiePolicy::LowestIndex);
            let b = argmax_index(&scaled, TiePolicy::LowestIndex);
            if a != b {
                prop_assert_eq!(scaled[a], scaled[b]);
            }
            prop_assert_eq!(a, argmax_index(&raw, TiePolicy::LowestIndex));
        }
    }
}
