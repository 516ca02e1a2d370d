//! Mixture of experts with a linear softmax gate.
//!
//! The gate maps a sample's features to mixture weights over the experts,
//! and the fused prediction is the convex combination `Σₘ gₘ(x)·pₘ`. The
//! gate is fit by SGD on the cross-entropy of the mixed prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::{softmax, Gradient, LinearModel, TrainConfig};
use crate::types::{ensure_aligned, LabelSpace, ProbVector, ScoreTable};

/// Floor on the mixed probability of the true class inside the logarithm.
const MIN_LIKELIHOOD: f64 = 1e-300;

pub fn moe_predict(gate: &LinearModel, features: &[f64], per_model: &[ProbVector]) -> Result<ProbVector> {
    if per_model.len() != gate.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: gate.num_classes(),
            got: per_model.len(),
        });
    }
    let k = per_model[0].len();
    if per_model.iter().any(|p| p.len() != k) {
        return Err(Error::LabelMismatch("experts disagree on class count".into()));
    }
    let g = gate.predict_proba(features)?;
    let mixed: Vec<f64> = (0..k)
        .map(|c| {
            per_model
                .iter()
                .zip(g.as_slice())
                .map(|(p, w)| w * p.get(c))
                .sum::<f64>()
                .min(1.0)
        })
        .collect();
    Ok(ProbVector::from_computed(mixed))
}

/// Gate label space: expert model ids, or `expert_<i>` when those are not
/// usable as distinct names.
fn expert_space(tables: &[ScoreTable]) -> LabelSpace {
    LabelSpace::new(tables.iter().map(|t| t.model_id().to_string()))
        .unwrap_or_else(|_| LabelSpace::new((0..tables.len()).map(|i| format!("expert_{i}"))).expect("distinct names"))
}

/// Mean negative log-likelihood of the mixture plus `(l2 / 2)·‖W‖²`, with
/// its gradient in the gate's parameters. `expert_true[i][m]` is expert m's
/// probability of sample i's true class.
pub fn moe_loss_and_grad(gate: &LinearModel, features: &[&[f64]], expert_true: &[Vec<f64>], l2: f64) -> Result<(f64, Gradient)> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = gate.num_classes();
    let d = gate.dim();
    let n = features.len() as f64;
    let mut grad = Gradient {
        weights: vec![0.0; m * d],
        bias: vec![0.0; m],
    };
    let mut loss = 0.0;
    for (x, pt) in features.iter().zip(expert_true) {
        let g = softmax(&gate.logits(x)?);
        let g = g.as_slice();
        let s: f64 = g.iter().zip(pt).map(|(a, b)| a * b).sum();
        loss -= s.max(MIN_LIKELIHOOD).ln();
        if s < MIN_LIKELIHOOD {
            continue;
        }
        for e in 0..m {
            // d(-ln s)/dz_e = g_e - g_e·p_e/s
            let delta = g[e] - g[e] * pt[e] / s;
            grad.bias[e] += delta;
            for (gw, &v) in grad.weights[e * d..(e + 1) * d].iter_mut().zip(x.iter()) {
                *gw += delta * v;
            }
        }
    }
    loss /= n;
    grad.bias.iter_mut().for_each(|g| *g /= n);
    let mut penalty = 0.0;
    for (gw, &w) in grad.weights.iter_mut().zip(gate.weights()) {
        *gw = *gw / n + l2 * w;
        penalty += w * w;
    }
    loss += 0.5 * l2 * penalty;
    if !loss.is_finite() {
        return Err(Error::NonFinite("gate loss".into()));
    }
    Ok((loss, grad))
}

/// Fit the gate. `features[i]` must describe the sample in row `i` of every
/// expert table; `labels[i]` is its true class.
pub fn moe_train(features: &[Vec<f64>], base_tables: &[ScoreTable], labels: &[usize], config: &TrainConfig) -> Result<LinearModel> {
    config.validate()?;
    ensure_aligned(base_tables)?;
    let n = base_tables[0].len();
    if features.len() != n || labels.len() != n {
        return Err(Error::Misaligned(format!(
            "{} feature rows and {} labels for {} table rows",
            features.len(),
            labels.len(),
            n
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = base_tables[0].label_space().len();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Validation(format!("label index {bad} out of range")));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let expert_true: Vec<Vec<f64>> = (0..n)
        .map(|i| base_tables.iter().map(|t| t.rows()[i].probs.get(labels[i])).collect())
        .collect();

    let mut gate = LinearModel::zeros(expert_space(base_tables), dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| features[i].as_slice()).collect();
            let pts: Vec<Vec<f64>> = chunk.iter().map(|&i| expert_true[i].clone()).collect();
            let (_, grad) = moe_loss_and_grad(&gate, &xs, &pts, config.l2)?;
            for (p, g) in gate.weights_mut().iter_mut().zip(&grad.weights) {
                *p -= config.learning_rate * g;
            }
            for (p, g) in gate.bias_mut().iter_mut().zip(&grad.bias) {
                *p -= config.learning_rate * g;
            }
        }
        if gate.weights().iter().chain(gate.bias()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gate parameters diverged".into()));
        }
    }
    Ok(gate)
}
