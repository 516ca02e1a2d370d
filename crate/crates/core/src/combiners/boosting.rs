//! Multiclass AdaBoost (SAMME) over the weighted base learner.
//!
//! Each round trains on the current sample weights, scores the weighted
//! error `ε`, and gives the stage the vote weight
//! `α = ln((1 − ε)/ε) + ln(K − 1)`. Misclassified samples are upweighted by
//! `exp(α)` and the weights renormalized to sum to one. Training halts once
//! a round is no better than chance (`ε ≥ 1 − 1/K`) or is perfect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{train, Dataset, LinearModel, TrainConfig};
use crate::types::{argmax_index, LabelSpace, ProbVector, TiePolicy};

/// Error substituted for a perfect round so its vote weight stays finite.
pub const PERFECT_ROUND_ERROR: f64 = 1e-10;

/// Stage vote weight for weighted error `error` over `num_classes` classes.
pub fn samme_alpha(error: f64, num_classes: usize) -> f64 {
    ((1.0 - error) / error).ln() + ((num_classes - 1) as f64).ln()
}

/// Error rate at which a `num_classes`-way learner is no better than chance.
pub fn chance_error(num_classes: usize) -> f64 {
    1.0 - 1.0 / num_classes as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub learner: LinearModel,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostEnsemble {
    stages: Vec<BoostStage>,
}

impl BoostEnsemble {
    pub fn new(stages: Vec<BoostStage>) -> Result<Self> {
        let first = stages.first().ok_or(Error::EmptyInput)?;
        for s in &stages {
            s.learner.validate()?;
            if !s.alpha.is_finite() {
                return Err(Error::NonFinite(format!("stage weight {}", s.alpha)));
            }
            if s.learner.label_space() != first.learner.label_space() || s.learner.dim() != first.learner.dim() {
                return Err(Error::LabelMismatch("boosting stages disagree on label space or dimension".into()));
            }
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[BoostStage] {
        &self.stages
    }

    pub fn label_space(&self) -> &LabelSpace {
        self.stages[0].learner.label_space()
    }

    pub fn dim(&self) -> usize {
        self.stages[0].learner.dim()
    }

    /// Per-class sums of the stage weights voting for each class.
    pub fn class_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scores = vec![0.0; self.label_space().len()];
        for s in &self.stages {
            scores[s.learner.predict(x)?] += s.alpha;
        }
        Ok(scores)
    }

    /// Class with the largest weighted vote, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_index(&self.class_scores(x)?, TiePolicy::LowestIndex))
    }

    /// Weighted vote shares as a distribution; its argmax agrees with
    /// [`predict`](Self::predict).
    pub fn vote_shares(&self, x: &[f64]) -> Result<ProbVector> {
        let scores = self.class_scores(x)?;
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            Ok(ProbVector::from_computed(scores.iter().map(|s| (s / total).min(1.0)).collect()))
        } else {
            Ok(ProbVector::one_hot(scores.len(), argmax_index(&scores, TiePolicy::LowestIndex)))
        }
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut correct = 0usize;
        for (x, &y) in data.features().iter().zip(data.labels()) {
            correct += usize::from(self.predict(x)? == y);
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

pub fn boosting_predict(ensemble: &BoostEnsemble, x: &[f64]) -> Result<usize> {
    ensemble.predict(x)
}

/// Why boosting stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RoundsExhausted,
    NoBetterThanChance,
    PerfectRound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub error: f64,
    pub alpha: f64,
    /// Sum of sample weights after this round's update.
    pub weight_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoostTrace {
    pub rounds: Vec<RoundRecord>,
    pub stop: StopReason,
}

pub fn boosting_train(data: &Dataset, rounds: usize, config: &TrainConfig) -> Result<BoostEnsemble> {
    boosting_train_traced(data, rounds, config).map(|(e, _)| e)
}

pub fn boosting_train_traced(data: &Dataset, rounds: usize, config: &TrainConfig) -> Result<(BoostEnsemble, BoostTrace)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rounds == 0 {
        return Err(Error::Validation("boosting needs at least one round".into()));
    }
    let n = data.len();
    let k = data.label_space().len();
    let chance = chance_error(k);
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    let mut records = Vec::new();
    let mut stop = StopReason::RoundsExhausted;
    for round in 0..rounds {
        let learner = train(data, config, Some(&weights))?;
        let mut missed = Vec::with_capacity(n);
        for (x, &y) in data.features().iter().zip(data.labels()) {
            missed.push(learner.predict(x)? != y);
        }
        let error = weights.iter().zip(&missed).filter(|(_, &m)| m).fold(0.0, |acc, (w, _)| acc + w);
        if error >= chance {
            if round == 0 {
                return Err(Error::DegenerateFirstRound { error, chance });
            }
            stop = StopReason::NoBetterThanChance;
            break;
        }
        if error <= 0.0 {
            let alpha = samme_alpha(PERFECT_ROUND_ERROR, k);
            stages.push(BoostStage { learner, alpha });
            records.push(RoundRecord {
                error,
                alpha,
                weight_sum: weights.iter().sum(),
            });
            stop = StopReason::PerfectRound;
            break;
        }
        let alpha = samme_alpha(error, k);
        let boost = alpha.exp();
        for (w, &m) in weights.iter_mut().zip(&missed) {
            if m {
                *w *= boost;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("boosting sample weights".into()));
        }
        records.push(RoundRecord {
            error,
            alpha,
            weight_sum: weights.iter().sum(),
        });
        stages.push(BoostStage { learner, alpha });
    }
    Ok((BoostEnsemble::new(stages)?, BoostTrace { rounds: records, stop }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn alpha_closed_form() {
        assert!((samme_alpha(0.25, 2) - 3f64.ln()).abs() < 1e-12);
        assert!((samme_alpha(0.5, 3) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(samme_alpha(0.5, 2), 0.0);
        assert_eq!(chance_error(2), 0.5);
    }

    #[test]
    fn chance_level_first_round_is_rejected() {
        // two identical points with opposite labels: any learner errs on half
        let ls = LabelSpace::binary_detection();
        let data = Dataset::new(ls, vec![vec![1.0], vec![1.0]], vec![0, 1]).unwrap();
        let err = boosting_train(&data, 3, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFirstRound { error, .. } if (error - 0.5).abs() < 1e-12));
    }

    #[test]
    fn weights_stay_normalized_and_alphas_positive() {
        let data = synthetic::three_blobs(90, 4);
        let config = TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        };
        let (ens, trace) = boosting_train_traced(&data, 10, &config).unwrap();
        assert!(!trace.rounds.is_empty());
        assert_eq!(ens.stages().len(), trace.rounds.len());
        for r in &trace.rounds {
            assert!((r.weight_sum - 1.0).abs() < 1e-9);
            assert!(r.alpha > 0.0);
        }
    }

    #[test]
    fn boosting_does_not_lose_training_accuracy() {
        let data = synthetic::three_blobs(150, 7);
        let config = TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        };
        let single = train(&data, &config, None).unwrap().accuracy(&data).unwrap();
        assert!(single < 1.0);
        let ens = boosting_train(&data, 10, &config).unwrap();
        let boosted = ens.accuracy(&data).unwrap();
        assert!(boosted >= single, "boosted {boosted} < single {single}");
    }

    #[test]
    fn separable_data_stops_on_a_perfect_round() {
        let data = synthetic::separable_blobs(40, 1);
        let (ens, trace) = boosting_train_traced(&data, 5, &TrainConfig::default()).unwrap();
        assert_eq!(trace.stop, StopReason::PerfectRound);
        assert_eq!(ens.stages().len(), 1);
        assert!(ens.stages()[0].alpha.is_finite());
    }

    fn stage(ls: &LabelSpace, favored: usize, alpha: f64) -> BoostStage {
        let mut bias = vec![0.0; ls.len()];
        bias[favored] = 1.0;
        BoostStage {
            learner: LinearModel::from_parts(ls.clone(), 1, vec![0.0; ls.len()], bias).unwrap(),
            alpha,
        }
    }

    #[test]
    fn prediction_examples() {
        let ls = LabelSpace::new(["a", "b", "c"]).unwrap();
        let one = BoostEnsemble::new(vec![stage(&ls, 2, 0.7)]).unwrap();
        assert_eq!(boosting_predict(&one, &[0.0]).unwrap(), 2);
        let tie = BoostEnsemble::new(vec![stage(&ls, 2, 0.7), stage(&ls, 1, 0.7)]).unwrap();
        assert_eq!(boosting_predict(&tie, &[0.0]).unwrap(), 1);
        let shares = tie.vote_shares(&[0.0]).unwrap();
        assert_eq!(shares.as_slice(), &[0.0, 0.5, 0.5]);
        assert!(matches!(boosting_predict(&tie, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
