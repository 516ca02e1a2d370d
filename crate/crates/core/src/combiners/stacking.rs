//! Stacked generalization: a linear softmax meta-classifier over the
//! concatenated class probabilities of the base models.
//!
//! Meta-training rows must be out-of-fold predictions; the helpers here
//! produce them with K-fold cross-fitting and keep enough provenance to
//! check it afterwards.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::{train, Dataset, FeatureSet, LinearModel, TrainConfig};
use crate::types::{ensure_aligned, ProbVector, ScoreRow, ScoreTable};

pub const DEFAULT_FOLDS: usize = 5;

/// Concatenate per-model probability vectors into one meta-feature vector.
pub fn stacking_features(per_model: &[ProbVector]) -> Vec<f64> {
    per_model.iter().flat_map(|p| p.as_slice().iter().copied()).collect()
}

/// Fit the meta-model on aligned, labeled, out-of-fold base tables.
pub fn stacking_train(base_tables_oof: &[ScoreTable], config: &TrainConfig) -> Result<LinearModel> {
    ensure_aligned(base_tables_oof)?;
    let first = &base_tables_oof[0];
    let labels = first.labels()?;
    for t in &base_tables_oof[1..] {
        if t.labels()? != labels {
            return Err(Error::Misaligned(format!("true labels of {:?} differ", t.model_id())));
        }
    }
    let x: Vec<Vec<f64>> = (0..first.len())
        .map(|i| {
            let per_model: Vec<ProbVector> = base_tables_oof.iter().map(|t| t.rows()[i].probs.clone()).collect();
            stacking_features(&per_model)
        })
        .collect();
    let data = Dataset::new(first.label_space().clone(), x, labels)?;
    train(&data, config, None)
}

pub fn stacking_predict(meta: &LinearModel, per_model: &[ProbVector]) -> Result<ProbVector> {
    let x = stacking_features(per_model);
    if x.len() != meta.dim() {
        return Err(Error::DimensionMismatch {
            expected: meta.dim(),
            got: x.len(),
        });
    }
    meta.predict_proba(&x)
}

/// Deterministic fold index per sample: seeded shuffle, then round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold[i] = rank % folds;
    }
    fold
}

/// Out-of-fold score table plus the provenance needed to audit it.
#[derive(Debug, Clone)]
pub struct OofScores {
    pub table: ScoreTable,
    /// Fold that held out each row.
    pub fold_of_row: Vec<usize>,
    /// Sample ids each fold's model was trained on.
    pub fold_train_ids: Vec<HashSet<String>>,
}

impl OofScores {
    /// True when no row was scored by a model that saw it in training.
    pub fn is_out_of_fold(&self) -> bool {
        self.table
            .rows()
            .iter()
            .zip(&self.fold_of_row)
            .all(|(row, &f)| !self.fold_train_ids[f].contains(&row.sample_id))
    }
}

/// Cross-fitted predictions of the base learner: each row is scored by a
/// model trained on the other `folds - 1` folds.
pub fn out_of_fold_scores(set: &FeatureSet, folds: usize, config: &TrainConfig, model_id: &str) -> Result<OofScores> {
    let data = set.to_dataset()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if folds < 2 || folds > data.len() {
        return Err(Error::Validation(format!("{folds} folds for {} samples", data.len())));
    }
    let fold_of_row = fold_assignment(data.len(), folds, config.seed);
    let mut probs: Vec<Option<ProbVector>> = vec![None; data.len()];
    let mut fold_train_ids = Vec::with_capacity(folds);
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| fold_of_row[i] != f).collect();
        let model = train(&data.subset(&train_idx), config, None)?;
        for i in (0..data.len()).filter(|&i| fold_of_row[i] == f) {
            probs[i] = Some(model.predict_proba(&data.features()[i])?);
        }
        fold_train_ids.push(train_idx.iter().map(|&i| set.ids()[i].clone()).collect());
    }
    let rows = probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| ScoreRow {
            sample_id: set.ids()[i].clone(),
            probs: p.expect("every row lies in one fold"),
            true_label: Some(data.labels()[i]),
        })
        .collect();
    Ok(OofScores {
        table: ScoreTable::new(set.label_space().clone(), model_id, rows)?,
        fold_of_row,
        fold_train_ids,
    })
}
