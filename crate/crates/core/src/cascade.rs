//! Two-stage fusion of a binary tumor detector with a multiclass tumor-type
//! classifier whose label space includes the negative class.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::combiners::voting::{check_weights, prob_average, weighted_average};
use crate::error::{Error, Result};
use crate::types::{LabelSpace, ProbVector, ScoreRow, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeRule {
    /// Spread the detector's positive mass over tumor classes in proportion
    /// to the multiclass model, then combine with the multiclass vector.
    #[default]
    LiftProportional,
    /// Negative when the detector's negative probability reaches the
    /// threshold, otherwise the multiclass tumor classes renormalized.
    HardGate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PostCombiner {
    ProbAverage {},
    /// Weights for (lifted detector, multiclass).
    WeightedAverage { weights: Vec<f64> },
}

fn default_threshold() -> f64 {
    0.5
}

fn default_post_combiner() -> PostCombiner {
    PostCombiner::ProbAverage {}
}

fn default_binary_negative() -> String {
    "no".into()
}

fn default_multi_negative() -> String {
    "no_tumor".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    #[serde(default)]
    pub rule: CascadeRule,
    #[serde(default = "default_threshold")]
    pub gate_threshold: f64,
    #[serde(default = "default_post_combiner")]
    pub post_combiner: PostCombiner,
    /// Negative class of the detector.
    #[serde(default = "default_binary_negative")]
    pub binary_negative: String,
    /// Negative class of the multiclass model.
    #[serde(default = "default_multi_negative")]
    pub multi_negative: String,
}

impl Default for CascadeSpec {
    fn default() -> Self {
        Self {
            rule: CascadeRule::default(),
            gate_threshold: default_threshold(),
            post_combiner: PostCombiner::ProbAverage {},
            binary_negative: default_binary_negative(),
            multi_negative: default_multi_negative(),
        }
    }
}

impl CascadeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate_threshold > 0.0 && self.gate_threshold < 1.0) {
            return Err(Error::Validation(format!("gate threshold {} outside (0, 1)", self.gate_threshold)));
        }
        if let PostCombiner::WeightedAverage { weights } = &self.post_combiner {
            check_weights(weights, 2)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Format {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// Resolved negative-class positions in the two label spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeLabels {
    pub binary_negative: usize,
    pub multi_negative: usize,
    pub num_classes: usize,
}

impl CascadeLabels {
    pub fn resolve(binary: &LabelSpace, multi: &LabelSpace, spec: &CascadeSpec) -> Result<Self> {
        if binary.len() != 2 {
            return Err(Error::LabelSpaceMismatch(format!("detector has {} classes, expected 2", binary.len())));
        }
        if multi.len() < 2 {
            return Err(Error::LabelSpaceMismatch("multiclass model needs a tumor class".into()));
        }
        let binary_negative = binary
            .index_of(&spec.binary_negative)
            .ok_or_else(|| Error::LabelSpaceMismatch(format!("detector lacks class {:?}", spec.binary_negative)))?;
        let multi_negative = multi
            .index_of(&spec.multi_negative)
            .ok_or_else(|| Error::LabelSpaceMismatch(format!("multiclass model lacks class {:?}", spec.multi_negative)))?;
        Ok(Self {
            binary_negative,
            multi_negative,
            num_classes: multi.len(),
        })
    }
}

fn check_lengths(labels: &CascadeLabels, bin: &ProbVector, multi: &ProbVector) -> Result<()> {
    if bin.len() != 2 || multi.len() != labels.num_classes {
        return Err(Error::LabelSpaceMismatch(format!(
            "vectors of length {} and {} for a 2 → {} cascade",
            bin.len(),
            multi.len(),
            labels.num_classes
        )));
    }
    Ok(())
}

/// Map a detector distribution into the multiclass space. The negative class
/// receives the detector's negative probability exactly; the positive mass is
/// split across tumor classes proportionally to `multi`, or evenly when
/// `multi` puts no mass on any tumor class.
pub fn lift_binary(labels: &CascadeLabels, bin: &ProbVector, multi: &ProbVector) -> Result<ProbVector> {
    check_lengths(labels, bin, multi)?;
    let negative = bin.get(labels.binary_negative);
    let positive = bin.get(1 - labels.binary_negative);
    let tumor_mass: f64 = (0..labels.num_classes)
        .filter(|&c| c != labels.multi_negative)
        .map(|c| multi.get(c))
        .sum();
    let spread = (labels.num_classes - 1) as f64;
    let out = (0..labels.num_classes)
        .map(|c| {
            if c == labels.multi_negative {
                negative
            } else if tumor_mass > 0.0 {
                (positive * multi.get(c) / tumor_mass).min(1.0)
            } else {
                positive / spread
            }
        })
        .collect();
    Ok(ProbVector::from_computed(out))
}

/// Hard triage: one-hot negative when `P(negative) ≥ τ`, otherwise the
/// multiclass tumor probabilities renormalized with the negative class zeroed.
pub fn hard_gate(labels: &CascadeLabels, bin: &ProbVector, multi: &ProbVector, threshold: f64) -> Result<ProbVector> {
    check_lengths(labels, bin, multi)?;
    let k = labels.num_classes;
    if bin.get(labels.binary_negative) >= threshold {
        return Ok(ProbVector::one_hot(k, labels.multi_negative));
    }
    let tumor_mass: f64 = (0..k).filter(|&c| c != labels.multi_negative).map(|c| multi.get(c)).sum();
    let out = (0..k)
        .map(|c| {
            if c == labels.multi_negative {
                0.0
            } else if tumor_mass > 0.0 {
                (multi.get(c) / tumor_mass).min(1.0)
            } else {
                1.0 / (k - 1) as f64
            }
        })
        .collect();
    Ok(ProbVector::from_computed(out))
}

/// Fuse one sample's pair of distributions under `spec`.
pub fn cascade_vector(labels: &CascadeLabels, bin: &ProbVector, multi: &ProbVector, spec: &CascadeSpec) -> Result<ProbVector> {
    match spec.rule {
        CascadeRule::HardGate => hard_gate(labels, bin, multi, spec.gate_threshold),
        CascadeRule::LiftProportional => {
            let lifted = lift_binary(labels, bin, multi)?;
            match &spec.post_combiner {
                PostCombiner::ProbAverage {} => prob_average(&[lifted, multi.clone()]),
                PostCombiner::WeightedAverage { weights } => weighted_average(&[lifted, multi.clone()], weights),
            }
        }
    }
}

/// Fuse a detector table with a multiclass table over the same samples.
/// Output rows follow the multiclass table's order and labels.
pub fn cascade_predict(bin_table: &ScoreTable, multi_table: &ScoreTable, spec: &CascadeSpec) -> Result<ScoreTable> {
    spec.validate()?;
    let labels = CascadeLabels::resolve(bin_table.label_space(), multi_table.label_space(), spec)?;
    if bin_table.len() != multi_table.len() {
        return Err(Error::Misaligned(format!(
            "detector has {} rows, multiclass model {}",
            bin_table.len(),
            multi_table.len()
        )));
    }
    let by_id: HashMap<&str, &ScoreRow> = bin_table.rows().iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let mut rows = Vec::with_capacity(multi_table.len());
    for row in multi_table.rows() {
        let bin = by_id
            .get(row.sample_id.as_str())
            .ok_or_else(|| Error::Misaligned(format!("sample {:?} missing from detector table", row.sample_id)))?;
        rows.push(ScoreRow {
            sample_id: row.sample_id.clone(),
            probs: cascade_vector(&labels, &bin.probs, &row.probs, spec)?,
            true_label: row.true_label,
        });
    }
    ScoreTable::new(multi_table.label_space().clone(), "cascade", rows)
}
