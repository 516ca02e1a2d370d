//! Stratified train/test splitting, confusion-matrix metrics and reports.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::score_io::DatasetManifest;
use crate::types::{ConfusionMatrix, ScoreTable, TiePolicy};

/// Disjoint train/test sample ids, each listed in manifest order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAssignment {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub ratio: f64,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.train_ids.len() + self.test_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of a class's `n` samples sent to training.
pub fn train_quota(ratio: f64, n: usize) -> usize {
    // the epsilon keeps products such as 0.8 * 155 from rounding down a step
    ((ratio * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Per class, `floor(ratio · n_c)` samples chosen by a seeded shuffle go to
/// training and the rest to test.
pub fn stratified_split(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<SplitAssignment> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Validation(format!("split ratio {ratio} outside (0, 1)")));
    }
    let ls = manifest.label_space();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ls.len()];
    for (i, e) in manifest.entries().iter().enumerate() {
        by_class[e.label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = vec![false; manifest.len()];
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.len() < 2 {
            return Err(Error::TinyClass {
                class: ls.name(c).to_string(),
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..train_quota(ratio, members.len())] {
            train[i] = true;
        }
    }
    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (e, &t) in manifest.entries().iter().zip(&train) {
        if t {
            train_ids.push(e.sample_id.clone());
        } else {
            test_ids.push(e.sample_id.clone());
        }
    }
    Ok(SplitAssignment {
        train_ids,
        test_ids,
        ratio,
        seed,
    })
}

/// Tally `[true][argmax]` over every row.
pub fn confusion(table: &ScoreTable, policy: TiePolicy) -> Result<ConfusionMatrix> {
    let labels = table.labels()?;
    let mut cm = ConfusionMatrix::zeros(table.label_space().clone());
    for (row, &truth) in table.rows().iter().zip(&labels) {
        cm.record(truth, row.probs.argmax(policy));
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub samples: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Ratios with a zero denominator, reported as 0, e.g. `precision:glioma`.
    pub zero_division: Vec<String>,
}

fn ratio_or_zero(num: u64, den: u64, what: &str, class: &str, notes: &mut Vec<String>) -> f64 {
    if den == 0 {
        notes.push(format!("{what}:{class}"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let k = cm.label_space().len();
    let mut zero_division = Vec::new();
    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let name = cm.label_space().name(c);
        let tp = cm.get(c, c);
        let predicted: u64 = (0..k).map(|t| cm.get(t, c)).sum();
        let support = cm.support(c);
        let precision = ratio_or_zero(tp, predicted, "precision", name, &mut zero_division);
        let recall = ratio_or_zero(tp, support, "recall", name, &mut zero_division);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class: name.to_string(),
            support,
            precision,
            recall,
            f1,
        });
    }
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;
    Ok(Metrics {
        samples: total,
        accuracy: cm.trace() as f64 / total as f64,
        macro_f1,
        per_class,
        zero_division,
    })
}

/// A published accuracy, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baseline {
    pub dataset: &'static str,
    pub model: &'static str,
    pub accuracy_percent: f64,
}

/// Published accuracies of the deep backbones on the two reference datasets
/// and of their ensemble. Context only: nothing here is reproduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReferenceBaselines;

const BASELINES: [Baseline; 9] = [
    Baseline { dataset: "dataset_1", model: "DenseNet", accuracy_percent: 71.43 },
    Baseline { dataset: "dataset_1", model: "ResNet", accuracy_percent: 80.36 },
    Baseline { dataset: "dataset_1", model: "EfficientNet", accuracy_percent: 66.0 },
    Baseline { dataset: "dataset_1", model: "VGG-16", accuracy_percent: 80.63 },
    Baseline { dataset: "dataset_2", model: "DenseNet", accuracy_percent: 84.32 },
    Baseline { dataset: "dataset_2", model: "ResNet", accuracy_percent: 50.0 },
    Baseline { dataset: "dataset_2", model: "EfficientNet", accuracy_percent: 77.0 },
    Baseline { dataset: "dataset_2", model: "ViT", accuracy_percent: 81.0 },
    // label space and fusion rule of this figure are not stated
    Baseline { dataset: "unstated", model: "ensemble", accuracy_percent: 91.07 },
];

impl ReferenceBaselines {
    pub fn entries(&self) -> &'static [Baseline] {
        &BASELINES
    }

    pub fn get(&self, dataset: &str, model: &str) -> Option<f64> {
        BASELINES
            .iter()
            .find(|b| b.dataset == dataset && b.model == model)
            .map(|b| b.accuracy_percent)
    }
}

/// What produced the evaluated table. Inputs are bare file names so reports
/// do not depend on where the files live.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub inputs: Vec<String>,
    pub model_id: String,
    /// Which partition the evaluated rows come from.
    pub split: String,
    pub tie_policy: TiePolicy,
}

pub const REPORT_SCHEMA: &str = "report_v1";
pub const MEASURED_LABEL: &str = "measured";
pub const PUBLISHED_LABEL: &str = "published (not reproduced)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredSection {
    pub status: &'static str,
    pub split: String,
    pub metrics: Metrics,
    pub confusion: Vec<Vec<u64>>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSection {
    pub status: &'static str,
    pub entries: Vec<Baseline>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub run: RunMetadata,
    /// Fusion configuration, when known.
    pub spec: Option<serde_json::Value>,
    pub measured: MeasuredSection,
    pub reference: ReferenceSection,
    pub footnotes: Vec<String>,
}

pub fn report(
    run: RunMetadata,
    cm: &ConfusionMatrix,
    metrics: &Metrics,
    spec: Option<serde_json::Value>,
    baselines: &ReferenceBaselines,
) -> Report {
    let mut footnotes = Vec::new();
    if !metrics.zero_division.is_empty() {
        footnotes.push(format!(
            "zero denominators reported as 0: {}",
            metrics.zero_division.join(", ")
        ));
    }
    footnotes.push("published figures come from full-scale deep models and are shown for context only".into());
    Report {
        schema: REPORT_SCHEMA,
        measured: MeasuredSection {
            status: MEASURED_LABEL,
            split: run.split.clone(),
            metrics: metrics.clone(),
            confusion: cm.counts().to_vec(),
            classes: cm.label_space().classes().to_vec(),
        },
        run,
        spec,
        reference: ReferenceSection {
            status: PUBLISHED_LABEL,
            entries: baselines.entries().to_vec(),
        },
        footnotes,
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let m = &self.measured.metrics;
        let mut out = String::new();
        let _ = writeln!(out, "model {}  split {}  samples {}", self.run.model_id, self.measured.split, m.samples);
        let _ = writeln!(out);
        let _ = writeln!(out, "[{}]", MEASURED_LABEL);
        let _ = writeln!(out, "accuracy  {:.4}", m.accuracy);
        let _ = writeln!(out, "macro_f1  {:.4}", m.macro_f1);
        let width = m.per_class.iter().map(|c| c.class.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "{:<width$}  precision  recall  f1      support", "class");
        for c in &m.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:<9.4}  {:<6.4}  {:<6.4}  {}",
                c.class, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[{}]", PUBLISHED_LABEL);
        for b in &self.reference.entries {
            let _ = writeln!(out, "{:<10} {:<13} {:>6.2}%", b.dataset, b.model, b.accuracy_percent);
        }
        if !self.footnotes.is_empty() {
            let _ = writeln!(out);
            for (i, f) in self.footnotes.iter().enumerate() {
                let _ = writeln!(out, "[{}] {}", i + 1, f);
            }
        }
        out
    }
}
