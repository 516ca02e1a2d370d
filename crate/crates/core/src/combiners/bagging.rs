//! Bootstrap aggregation of the base learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiners::voting::prob_average;
use crate::error::{Error, Result};
use crate::learner::{train, Dataset, LinearModel, TrainConfig};
use crate::types::{LabelSpace, ProbVector, TiePolicy};

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_sample(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Replicates trained on independent bootstrap subsets; predictions are the
/// averaged replicate probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagEnsemble {
    replicates: Vec<LinearModel>,
}

impl BagEnsemble {
    pub fn new(replicates: Vec<LinearModel>) -> Result<Self> {
        let first = replicates.first().ok_or(Error::EmptyInput)?;
        for r in &replicates {
            r.validate()?;
            if r.label_space() != first.label_space() || r.dim() != first.dim() {
                return Err(Error::LabelMismatch("bagging replicates disagree on label space or dimension".into()));
            }
        }
        Ok(Self { replicates })
    }

    pub fn replicates(&self) -> &[LinearModel] {
        &self.replicates
    }

    pub fn label_space(&self) -> &LabelSpace {
        self.replicates[0].label_space()
    }

    pub fn dim(&self) -> usize {
        self.replicates[0].dim()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbVector> {
        let per_model = self.replicates.iter().map(|m| m.predict_proba(x)).collect::<Result<Vec<_>>>()?;
        prob_average(&per_model)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax(TiePolicy::LowestIndex))
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Replicate `i` trains on `bootstrap_sample(n, seed + i)`.
    Bootstrap,
    /// Every replicate trains on the full dataset.
    Identity,
}

/// Train `replicates` learners, in parallel, each on its own resample.
pub fn bagging_train(data: &Dataset, replicates: usize, config: &TrainConfig, seed: u64, resampling: Resampling) -> Result<BagEnsemble> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if replicates == 0 {
        return Err(Error::Validation("bagging needs at least one replicate".into()));
    }
    let models = (0..replicates)
        .into_par_iter()
        .map(|i| match resampling {
            Resampling::Bootstrap => {
                let idx = bootstrap_sample(data.len(), seed.wrapping_add(i as u64));
                train(&data.subset(&idx), config, None)
            }
            Resampling::Identity => train(data, config, None),
        })
        .collect::<Result<Vec<_>>>()?;
    BagEnsemble::new(models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use std::collections::HashSet;

    #[test]
    fn bootstrap_examples() {
        assert_eq!(bootstrap_sample(1, 99), vec![0]);
        assert_eq!(bootstrap_sample(50, 7), bootstrap_sample(50, 7));
        assert_ne!(bootstrap_sample(50, 7), bootstrap_sample(50, 8));
        assert!(bootstrap_sample(30, 3).iter().all(|&i| i < 30));
    }

    #[test]
    fn bootstrap_covers_about_one_minus_inv_e() {
        for seed in 0..5 {
            let n = 10_000;
            let distinct: HashSet<usize> = bootstrap_sample(n, seed).into_iter().collect();
            let frac = distinct.len() as f64 / n as f64;
            assert!((0.60..=0.66).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn identity_resampling_single_replicate_equals_train() {
        let data = synthetic::noisy_blobs(40, 0.2, 1);
        let config = TrainConfig::default();
        let bag = bagging_train(&data, 1, &config, 5, Resampling::Identity).unwrap();
        assert_eq!(bag.replicates()[0], train(&data, &config, None).unwrap());
    }

    #[test]
    fn identical_replicates_predict_like_one_model() {
        let data = synthetic::noisy_blobs(40, 0.2, 1);
        let config = TrainConfig::default();
        let single = train(&data, &config, None).unwrap();
        let bag = bagging_train(&data, 4, &config, 5, Resampling::Identity).unwrap();
        for x in data.features() {
            let a = bag.predict_proba(x).unwrap();
            let b = single.predict_proba(x).unwrap();
            assert_eq!(bag.predict(x).unwrap(), single.predict(x).unwrap());
            for c in 0..2 {
                assert!((a.get(c) - b.get(c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parallel_training_is_schedule_independent() {
        let data = synthetic::noisy_blobs(60, 0.3, 2);
        let config = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let a = bagging_train(&data, 6, &config, 10, Resampling::Bootstrap).unwrap();
        let b = bagging_train(&data, 6, &config, 10, Resampling::Bootstrap).unwrap();
        assert_eq!(a, b);
        let seq: Vec<LinearModel> = (0..6)
            .map(|i| train(&data.subset(&bootstrap_sample(60, 10 + i)), &config, None).unwrap())
            .collect();
        assert_eq!(a.replicates(), seq.as_slice());
    }

    #[test]
    fn rejects_empty_inputs() {
        let empty = Dataset::new(LabelSpace::binary_detection(), vec![], vec![]).unwrap();
        assert!(matches!(
            bagging_train(&empty, 3, &TrainConfig::default(), 0, Resampling::Bootstrap),
            Err(Error::EmptyDataset)
        ));
        assert!(BagEnsemble::new(vec![]).is_err());
    }
}
