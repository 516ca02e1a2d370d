//! The ensemble mechanisms: fixed fusion rules, trainable meta-learners and
//! resampling ensembles, plus their JSON persistence.

pub mod bagging;
pub mod boosting;
pub mod moe;
pub mod stacking;
pub mod voting;

use serde::{Deserialize, Serialize};

pub use bagging::{bagging_train, bootstrap_sample, BagEnsemble, Resampling};
pub use boosting::{boosting_predict, boosting_train, boosting_train_traced, samme_alpha, BoostEnsemble, BoostStage, BoostTrace};
pub use moe::{moe_predict, moe_train};
pub use stacking::{out_of_fold_scores, stacking_predict, stacking_train, OofScores};
pub use voting::{accuracy_weights, grid_search_weights, majority_vote, max_rule, prob_average, weighted_average};

use crate::error::{Error, Result};
use crate::learner::{FeatureSet, LinearModel, TrainConfig};
use crate::types::{ensure_aligned, LabelSpace, ProbVector, ScoreRow, ScoreTable, TiePolicy};

fn json_error(e: serde_json::Error) -> Error {
    Error::Format {
        line: e.line() as u64,
        message: e.to_string(),
    }
}

/// Declarative description of a fusion strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    MajorityVote {
        #[serde(default)]
        tie_policy: TiePolicy,
    },
    MaxRule {
        #[serde(default)]
        tie_policy: TiePolicy,
    },
    ProbAverage {},
    WeightedAverage {
        weights: Vec<f64>,
    },
    Stacking {
        meta_model: LinearModel,
    },
    MixtureOfExperts {
        gate: LinearModel,
    },
    Bagging {
        replicates: usize,
        #[serde(default)]
        config: TrainConfig,
        #[serde(default)]
        seed: u64,
    },
    Boosting {
        rounds: usize,
        #[serde(default)]
        config: TrainConfig,
    },
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnsembleSpec::WeightedAverage { weights } => {
                voting::check_weights(weights, weights.len())?;
            }
            EnsembleSpec::Stacking { meta_model } => meta_model.validate()?,
            EnsembleSpec::MixtureOfExperts { gate } => gate.validate()?,
            EnsembleSpec::Bagging { replicates, config, .. } => {
                if *replicates == 0 {
                    return Err(Error::Validation("bagging needs at least one replicate".into()));
                }
                config.validate()?;
            }
            EnsembleSpec::Boosting { rounds, config } => {
                if *rounds == 0 {
                    return Err(Error::Validation("boosting needs at least one round".into()));
                }
                config.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(json_error)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// Any trained model file: a single linear model or an ensemble bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBundle {
    Linear(LinearModel),
    Bag(BagEnsemble),
    Boost(BoostEnsemble),
}

impl ModelBundle {
    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(text).map_err(json_error)?;
        match &bundle {
            ModelBundle::Linear(m) => m.validate()?,
            ModelBundle::Bag(b) => {
                BagEnsemble::new(b.replicates().to_vec())?;
            }
            ModelBundle::Boost(b) => {
                BoostEnsemble::new(b.stages().to_vec())?;
            }
        }
        Ok(bundle)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn label_space(&self) -> &LabelSpace {
        match self {
            ModelBundle::Linear(m) => m.label_space(),
            ModelBundle::Bag(b) => b.label_space(),
            ModelBundle::Boost(b) => b.label_space(),
        }
    }

    /// Class distribution for one feature vector. Boosting reports its
    /// weighted vote shares.
    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbVector> {
        match self {
            ModelBundle::Linear(m) => m.predict_proba(x),
            ModelBundle::Bag(b) => b.predict_proba(x),
            ModelBundle::Boost(b) => b.vote_shares(x),
        }
    }

    /// Score every sample of a feature set, carrying its labels through.
    pub fn score(&self, set: &FeatureSet, model_id: &str) -> Result<ScoreTable> {
        if set.label_space() != self.label_space() {
            // labels are re-resolved by name so feature files may list
            // classes in any order
            for l in set.label_space().classes() {
                if self.label_space().index_of(l).is_none() {
                    return Err(Error::LabelSpaceMismatch(format!("feature label {l:?} unknown to the model")));
                }
            }
        }
        let rows = set
            .ids()
            .iter()
            .zip(set.rows())
            .zip(set.labels())
            .map(|((id, x), label)| {
                Ok(ScoreRow {
                    sample_id: id.clone(),
                    probs: self.predict_proba(x)?,
                    true_label: label.map(|l| self.label_space().index_of(set.label_space().name(l)).expect("checked above")),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreTable::new(self.label_space().clone(), model_id, rows)
    }
}

/// Fusion rule applied row by row to aligned score tables.
#[derive(Debug, Clone)]
pub enum Fusion<'a> {
    /// One-hot output on the voted class.
    Majority(TiePolicy),
    /// One-hot output on the max-rule class.
    Max(TiePolicy),
    Average,
    Weighted(Vec<f64>),
    Stacking(&'a LinearModel),
    /// Gate plus the features of every table row, matched by sample id.
    MixtureOfExperts { gate: &'a LinearModel, features: &'a FeatureSet },
}

/// Fuse aligned tables into one table under `rule`. True labels come from the
/// first table.
pub fn fuse_tables(tables: &[ScoreTable], rule: &Fusion<'_>, model_id: &str) -> Result<ScoreTable> {
    ensure_aligned(tables)?;
    let first = &tables[0];
    let k = first.label_space().len();
    let feature_index: Option<std::collections::HashMap<&str, usize>> = match rule {
        Fusion::MixtureOfExperts { features, .. } => Some(features.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()),
        _ => None,
    };
    let mut rows = Vec::with_capacity(first.len());
    for (i, row) in first.rows().iter().enumerate() {
        let per_model: Vec<ProbVector> = tables.iter().map(|t| t.rows()[i].probs.clone()).collect();
        let probs = match rule {
            Fusion::Majority(policy) => {
                let votes: Vec<usize> = per_model.iter().map(|p| p.argmax(TiePolicy::LowestIndex)).collect();
                ProbVector::one_hot(k, majority_vote(&votes, k, *policy)?)
            }
            Fusion::Max(policy) => ProbVector::one_hot(k, max_rule(&per_model, *policy)?),
            Fusion::Average => prob_average(&per_model)?,
            Fusion::Weighted(w) => weighted_average(&per_model, w)?,
            Fusion::Stacking(meta) => stacking_predict(meta, &per_model)?,
            Fusion::MixtureOfExperts { gate, features } => {
                let idx = feature_index
                    .as_ref()
                    .and_then(|m| m.get(row.sample_id.as_str()).copied())
                    .ok_or_else(|| Error::Misaligned(format!("no features for sample {:?}", row.sample_id)))?;
                moe_predict(gate, &features.rows()[idx], &per_model)?
            }
        };
        rows.push(ScoreRow {
            sample_id: row.sample_id.clone(),
            probs,
            true_label: row.true_label,
        });
    }
    ScoreTable::new(first.label_space().clone(), model_id, rows)
}
