//! Multinomial logistic regression trained by minibatch SGD.
//!
//! This is the base classifier behind bagging and boosting and the
//! meta-learner behind stacking. Training is single-threaded and fully
//! deterministic for a given seed: a seeded Fisher–Yates shuffle per epoch
//! and gradients accumulated in sample order.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{bilinear_resize, RasterImage};
use crate::types::{LabelSpace, ProbVector, TiePolicy};

/// Resize (stretch) to `side`×`side` and flatten row-major.
pub fn extract_features(img: &RasterImage, side: usize) -> Vec<f64> {
    assert!(side >= 1, "feature side must be positive");
    bilinear_resize(img, side, side).pixels().to_vec()
}

/// Feature vectors with sample ids and optional labels, as read from a
/// feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    label_space: LabelSpace,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Option<usize>>,
}

impl FeatureSet {
    pub fn new(label_space: LabelSpace, ids: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Option<usize>>) -> Result<Self> {
        if ids.len() != rows.len() || ids.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                got: rows.len().min(labels.len()),
            });
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if id.is_empty() || !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("empty or duplicate sample_id {id:?}")));
            }
        }
        if let Some(first) = rows.first() {
            if first.is_empty() {
                return Err(Error::Validation("feature vectors are empty".into()));
            }
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: bad.len(),
                });
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        if labels.iter().flatten().any(|&l| l >= label_space.len()) {
            return Err(Error::Validation("label index out of range".into()));
        }
        Ok(Self {
            label_space,
            ids,
            rows,
            labels,
        })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Training view; every row must be labeled.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let y = self
            .labels
            .iter()
            .zip(&self.ids)
            .map(|(l, id)| l.ok_or_else(|| Error::MissingLabels(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.label_space.clone(), self.rows.clone(), y)
    }

    /// Keep only the samples whose id is in `keep`, in original order.
    pub fn filter_ids(&self, keep: &HashSet<&str>) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(self.ids[i].as_str())).collect();
        Self {
            label_space: self.label_space.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Labeled training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    label_space: LabelSpace,
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
}

impl Dataset {
    pub fn new(label_space: LabelSpace, x: Vec<Vec<f64>>, y: Vec<usize>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if let Some(first) = x.first() {
            if let Some(bad) = x.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: bad.len(),
                });
            }
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= label_space.len()) {
            return Err(Error::Validation(format!("label index {bad} out of range")));
        }
        Ok(Self { label_space, x, y })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Rows at `indices`, repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            label_space: self.label_space.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 16,
            l2: 0.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Validation("epochs and batch size must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Validation(format!("l2 {} must be nonnegative", self.l2)));
        }
        Ok(())
    }
}

/// Softmax over linear scores: `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    label_space: LabelSpace,
    dim: usize,
    /// Row-major `K × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<TrainConfig>,
}

/// Gradient with the same layout as a [`LinearModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(label_space: LabelSpace, dim: usize) -> Self {
        let k = label_space.len();
        Self {
            label_space,
            dim,
            weights: vec![0.0; k * dim],
            bias: vec![0.0; k],
            config: None,
        }
    }

    pub fn from_parts(label_space: LabelSpace, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let model = Self {
            label_space,
            dim,
            weights,
            bias,
            config: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn num_classes(&self) -> usize {
        self.label_space.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn config(&self) -> Option<&TrainConfig> {
        self.config.as_ref()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `W x + b`.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.logits_unchecked(x))
    }

    fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..self.bias.len())
            .map(|c| {
                let row = &self.weights[c * d..(c + 1) * d];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[c]
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbVector> {
        Ok(softmax(&self.logits(x)?))
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

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Check parameter shapes and finiteness, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let k = self.label_space.len();
        if self.weights.len() != k * self.dim {
            return Err(Error::DimensionMismatch {
                expected: k * self.dim,
                got: self.weights.len(),
            });
        }
        if self.bias.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.bias.len(),
            });
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LinearModel = serde_json::from_str(text).map_err(|e| Error::Format {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }
}

/// Exponential normalization with the maximum subtracted first.
pub fn softmax(logits: &[f64]) -> ProbVector {
    assert!(!logits.is_empty(), "softmax of an empty vector");
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector::from_computed(exps.into_iter().map(|e| e / sum).collect())
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy plus `(l2 / 2)·‖W‖²` (bias unregularized) and its exact
/// gradient.
pub fn loss_and_grad(model: &LinearModel, features: &[Vec<f64>], labels: &[usize], l2: f64) -> Result<(f64, Gradient)> {
    let rows: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
    weighted_loss_and_grad(model, &rows, labels, None, l2)
}

/// As [`loss_and_grad`], with each sample's cross-entropy scaled by its
/// weight before averaging.
pub fn weighted_loss_and_grad(
    model: &LinearModel,
    rows: &[&[f64]],
    labels: &[usize],
    sample_weights: Option<&[f64]>,
    l2: f64,
) -> Result<(f64, Gradient)> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    if let Some(w) = sample_weights {
        if w.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: w.len(),
            });
        }
    }
    let k = model.num_classes();
    let d = model.dim;
    let n = rows.len() as f64;
    let mut grad = Gradient {
        weights: vec![0.0; k * d],
        bias: vec![0.0; k],
    };
    let mut loss = 0.0;
    for (i, (&x, &y)) in rows.iter().zip(labels).enumerate() {
        model.check_dim(x)?;
        if y >= k {
            return Err(Error::Validation(format!("label index {y} out of range")));
        }
        let w = sample_weights.map_or(1.0, |sw| sw[i]);
        let z = model.logits_unchecked(x);
        let lse = log_sum_exp(&z);
        loss += w * (lse - z[y]);
        for c in 0..k {
            let delta = w * ((z[c] - lse).exp() - f64::from(u8::from(c == y)));
            grad.bias[c] += delta;
            for (g, &v) in grad.weights[c * d..(c + 1) * d].iter_mut().zip(x) {
                *g += delta * v;
            }
        }
    }
    loss /= n;
    grad.bias.iter_mut().for_each(|g| *g /= n);
    let mut penalty = 0.0;
    for (g, &w) in grad.weights.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
        penalty += w * w;
    }
    loss += 0.5 * l2 * penalty;
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    Ok((loss, grad))
}

/// Scale nonnegative weights to mean 1. `None` when every weight is equal,
/// so uniformly weighted training is bitwise identical to unweighted.
fn normalized_weights(weights: &[f64], n: usize) -> Result<Option<Vec<f64>>> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Validation("sample weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if sum == 0.0 {
        return Err(Error::AllZeroWeights);
    }
    if weights.iter().all(|&w| w == weights[0]) {
        return Ok(None);
    }
    let mean = sum / n as f64;
    Ok(Some(weights.iter().map(|w| w / mean).collect()))
}

/// Train from zero-initialized parameters; returns the final-epoch model.
pub fn train(data: &Dataset, config: &TrainConfig, sample_weights: Option<&[f64]>) -> Result<LinearModel> {
    train_traced(data, config, sample_weights, false).map(|(m, _)| m)
}

/// Train, optionally recording the full-data objective before the first
/// epoch and after every epoch.
pub fn train_traced(
    data: &Dataset,
    config: &TrainConfig,
    sample_weights: Option<&[f64]>,
    trace: bool,
) -> Result<(LinearModel, Vec<f64>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let weights = match sample_weights {
        Some(w) => normalized_weights(w, data.len())?,
        None => None,
    };
    let mut model = LinearModel::zeros(data.label_space.clone(), data.dim());
    let all_rows: Vec<&[f64]> = data.x.iter().map(Vec::as_slice).collect();
    let objective = |m: &LinearModel| {
        weighted_loss_and_grad(m, &all_rows, &data.y, weights.as_deref(), config.l2).map(|(l, _)| l)
    };
    let mut history = Vec::new();
    if trace {
        history.push(objective(&model)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rows = Vec::with_capacity(config.batch_size);
    let mut labels = Vec::with_capacity(config.batch_size);
    let mut batch_weights = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            rows.clear();
            labels.clear();
            batch_weights.clear();
            for &i in chunk {
                rows.push(data.x[i].as_slice());
                labels.push(data.y[i]);
                if let Some(w) = &weights {
                    batch_weights.push(w[i]);
                }
            }
            let sw = weights.as_ref().map(|_| batch_weights.as_slice());
            let (_, grad) = weighted_loss_and_grad(&model, &rows, &labels, sw, config.l2)?;
            for (p, g) in model.weights.iter_mut().zip(&grad.weights) {
                *p -= config.learning_rate * g;
            }
            for (p, g) in model.bias.iter_mut().zip(&grad.bias) {
                *p -= config.learning_rate * g;
            }
        }
        if model.weights.iter().chain(&model.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters diverged".into()));
        }
        if trace {
            history.push(objective(&model)?);
        }
    }
    model.config = Some(*config);
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn binary() -> LabelSpace {
        LabelSpace::binary_detection()
    }

    #[test]
    fn features_of_small_images() {
        let px: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let im = RasterImage::new(4, 4, px.clone()).unwrap();
        assert_eq!(extract_features(&im, 4), px);
        let flat = RasterImage::filled(3, 5, 0.5).unwrap();
        assert_eq!(extract_features(&flat, 2), vec![0.5; 4]);
    }

    #[test]
    fn single_feature_is_center_bilinear_sample() {
        // oracle: direct bilinear evaluation at the image center
        let px: Vec<f64> = (0..12).map(|i| ((i * 7) % 12) as f64 / 11.0).collect();
        let im = RasterImage::new(3, 4, px).unwrap();
        let (cy, cx) = ((3.0 - 1.0) / 2.0, (4.0 - 1.0) / 2.0);
        let (y0, x0) = (cy as usize, cx as usize);
        let (fy, fx) = (cy - y0 as f64, cx - x0 as f64);
        let at = |r: usize, c: usize| im.get(r.min(2), c.min(3));
        let expected = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
            + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        let got = extract_features(&im, 1);
        assert_eq!(got.len(), 1);
        assert!((got[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        assert!(p.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.get(1) - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[1000.0, 0.0]);
        assert_eq!(p.get(0), 1.0);
        assert!(p.get(1) < 1e-300);
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let m = LinearModel::zeros(binary(), 3);
        let (loss, _) = loss_and_grad(&m, &[vec![0.3, -1.0, 2.0]], &[1], 0.0).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_prediction_has_vanishing_loss() {
        let m = LinearModel::from_parts(binary(), 1, vec![-50.0, 50.0], vec![0.0, 0.0]).unwrap();
        let (loss, _) = loss_and_grad(&m, &[vec![1.0]], &[1], 0.0).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = LinearModel::zeros(binary(), 3);
        assert!(matches!(
            loss_and_grad(&m, &[vec![1.0]], &[0], 0.0),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
        assert!(matches!(m.predict_proba(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // central differences, step 1e-5
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (model, x, y, l2) = synthetic::random_model_and_batch(&mut rng);
            let (_, grad) = loss_and_grad(&model, &x, &y, l2).unwrap();
            let h = 1e-5;
            for j in 0..model.weights().len() {
                let mut plus = model.clone();
                plus.weights_mut()[j] += h;
                let mut minus = model.clone();
                minus.weights_mut()[j] -= h;
                let fd = (loss_and_grad(&plus, &x, &y, l2).unwrap().0 - loss_and_grad(&minus, &x, &y, l2).unwrap().0) / (2.0 * h);
                let rel = (fd - grad.weights[j]).abs() / fd.abs().max(grad.weights[j].abs()).max(1e-8);
                assert!(rel < 1e-5, "weight {j}: fd {fd} vs {}", grad.weights[j]);
            }
        }
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let data = synthetic::separable_blobs(40, 1);
        let config = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let model = train(&data, &config, None).unwrap();
        assert_eq!(model.accuracy(&data).unwrap(), 1.0);
        for (x, &y) in data.features().iter().zip(data.labels()) {
            assert_eq!(model.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn single_sample_is_memorized() {
        let data = Dataset::new(LabelSpace::tumor_types(), vec![vec![0.2, 0.9]], vec![2]).unwrap();
        let config = TrainConfig {
            epochs: 300,
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        let model = train(&data, &config, None).unwrap();
        assert!(model.predict_proba(&[0.2, 0.9]).unwrap().get(2) > 0.99);
    }

    #[test]
    fn training_is_deterministic() {
        let data = synthetic::noisy_blobs(60, 0.4, 5);
        let config = TrainConfig::default();
        let a = train(&data, &config, None).unwrap();
        let b = train(&data, &config, None).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.bias(), b.bias());
    }

    #[test]
    fn uniform_sample_weights_match_unweighted() {
        let data = synthetic::noisy_blobs(50, 0.4, 8);
        let config = TrainConfig::default();
        let plain = train(&data, &config, None).unwrap();
        let w = vec![1.0 / 50.0; 50];
        let weighted = train(&data, &config, Some(&w)).unwrap();
        assert_eq!(plain, weighted);
    }

    #[test]
    fn bad_sample_weights() {
        let data = synthetic::noisy_blobs(10, 0.4, 8);
        let config = TrainConfig::default();
        assert!(matches!(train(&data, &config, Some(&[0.0; 10])), Err(Error::AllZeroWeights)));
        assert!(train(&data, &config, Some(&[1.0; 3])).is_err());
        let empty = Dataset::new(binary(), vec![], vec![]).unwrap();
        assert!(matches!(train(&empty, &config, None), Err(Error::EmptyDataset)));
    }

    #[test]
    fn full_batch_loss_is_monotone() {
        let data = synthetic::separable_blobs(40, 1);
        let config = TrainConfig {
            learning_rate: 0.01,
            epochs: 100,
            batch_size: data.len(),
            ..TrainConfig::default()
        };
        let (_, history) = train_traced(&data, &config, None, true).unwrap();
        assert_eq!(history.len(), 101);
        for w in history.windows(2) {
            assert!(w[1] <= w[0], "loss rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn predictions_from_zero_and_bias() {
        let m = LinearModel::zeros(LabelSpace::tumor_types(), 2);
        assert_eq!(m.predict_proba(&[3.0, -1.0]).unwrap(), ProbVector::uniform(4));
        let m = LinearModel::from_parts(binary(), 2, vec![1.0, 2.0, -3.0, 4.0], vec![0.3, -0.2]).unwrap();
        assert_eq!(m.predict_proba(&[0.0, 0.0]).unwrap(), softmax(&[0.3, -0.2]));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let data = synthetic::noisy_blobs(30, 0.5, 2);
        let model = train(&data, &TrainConfig::default(), None).unwrap();
        let back = LinearModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert!(LinearModel::from_json("{\"label_space\":[\"a\"],\"dim\":2,\"weights\":[1.0],\"bias\":[0.0]}").is_err());
    }
}
