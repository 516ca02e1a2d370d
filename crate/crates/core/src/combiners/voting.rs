//! Fixed fusion rules over per-model outputs: majority vote, max rule,
//! probability averaging and weighted probability averaging.

use crate::error::{Error, Result};
use crate::types::{argmax_index, ProbVector, ScoreTable, TiePolicy};

/// Tolerance on the sum of fusion weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Modal class among hard votes over `num_classes` classes.
///
/// Even numbers of voters are accepted; ties are resolved by `policy`.
pub fn majority_vote(votes: &[usize], num_classes: usize, policy: TiePolicy) -> Result<usize> {
    if votes.is_empty() {
        return Err(Error::EmptyVotes);
    }
    let mut tally = vec![0u32; num_classes];
    for &v in votes {
        *tally.get_mut(v).ok_or_else(|| Error::Validation(format!("vote for class {v} out of range")))? += 1;
    }
    let best = *tally.iter().max().expect("non-empty");
    let tied: Vec<usize> = (0..num_classes).filter(|&c| tally[c] == best).collect();
    Ok(policy.pick(&tied))
}

fn check_shared_len(per_model: &[ProbVector]) -> Result<usize> {
    let first = per_model.first().ok_or(Error::EmptyInput)?;
    let k = first.len();
    if let Some(bad) = per_model.iter().find(|p| p.len() != k) {
        return Err(Error::LabelMismatch(format!("{} classes vs {}", bad.len(), k)));
    }
    Ok(k)
}

/// Class of the single most confident (model, class) cell. Ties are broken
/// by `policy` over cells in (model index, class index) order.
pub fn max_rule(per_model: &[ProbVector], policy: TiePolicy) -> Result<usize> {
    let k = check_shared_len(per_model)?;
    let cells: Vec<f64> = per_model.iter().flat_map(|p| p.as_slice().iter().copied()).collect();
    Ok(argmax_index(&cells, policy) % k)
}

/// Per-class arithmetic mean.
pub fn prob_average(per_model: &[ProbVector]) -> Result<ProbVector> {
    let k = check_shared_len(per_model)?;
    let m = per_model.len() as f64;
    let mean = (0..k)
        .map(|c| (per_model.iter().map(|p| p.get(c)).sum::<f64>() / m).min(1.0))
        .collect();
    Ok(ProbVector::from_computed(mean))
}

/// Validate fusion weights: one per model, nonnegative, summing to 1.
pub fn check_weights(weights: &[f64], models: usize) -> Result<()> {
    if weights.len() != models {
        return Err(Error::WeightMismatch {
            weights: weights.len(),
            models,
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::BadWeights(format!("weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::BadWeights(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Per-class `Σ wᵢ·pᵢ`.
pub fn weighted_average(per_model: &[ProbVector], weights: &[f64]) -> Result<ProbVector> {
    let k = check_shared_len(per_model)?;
    check_weights(weights, per_model.len())?;
    let mixed: Vec<f64> = (0..k)
        .map(|c| {
            per_model
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p.get(c))
                .sum::<f64>()
                .min(1.0)
        })
        .collect();
    // weights within tolerance of 1 leave the sum off by at most that much
    let sum: f64 = mixed.iter().sum();
    Ok(ProbVector::from_computed(if (sum - 1.0).abs() > 1e-12 {
        mixed.iter().map(|v| v / sum).collect()
    } else {
        mixed
    }))
}

/// Fraction of rows whose argmax (lowest-index ties) matches the label.
pub fn table_accuracy(table: &ScoreTable) -> Result<f64> {
    let labels = table.labels()?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let correct = table
        .rows()
        .iter()
        .zip(&labels)
        .filter(|(r, &l)| r.probs.argmax(TiePolicy::LowestIndex) == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Normalize raw accuracies into fusion weights; all-zero gives uniform.
pub fn normalize_accuracies(accuracies: &[f64]) -> Result<Vec<f64>> {
    if accuracies.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(a) = accuracies.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(Error::BadWeights(format!("accuracy {a}")));
    }
    let total: f64 = accuracies.iter().sum();
    if total == 0.0 {
        return Ok(vec![1.0 / accuracies.len() as f64; accuracies.len()]);
    }
    Ok(accuracies.iter().map(|a| a / total).collect())
}

/// Weights proportional to each model's validation accuracy.
pub fn accuracy_weights(validation_tables: &[ScoreTable]) -> Result<Vec<f64>> {
    crate::types::ensure_aligned(validation_tables)?;
    let first = validation_tables[0].labels()?;
    let mut accuracies = Vec::with_capacity(validation_tables.len());
    for t in validation_tables {
        if t.labels()? != first {
            return Err(Error::LabelMismatch(format!("true labels of {:?} differ", t.model_id())));
        }
        accuracies.push(table_accuracy(t)?);
    }
    normalize_accuracies(&accuracies)
}

/// Optional strategy: exhaustive search over the weight simplex on a grid of
/// `1/steps`, maximizing validation accuracy of the weighted average. Ties
/// keep the first grid point in lexicographic order.
pub fn grid_search_weights(validation_tables: &[ScoreTable], steps: usize) -> Result<Vec<f64>> {
    crate::types::ensure_aligned(validation_tables)?;
    if steps == 0 {
        return Err(Error::Validation("grid needs at least one step".into()));
    }
    let labels = validation_tables[0].labels()?;
    let m = validation_tables.len();
    let mut best: Option<(usize, Vec<f64>)> = None;
    let mut counts = vec![0usize; m];
    loop {
        if counts.iter().sum::<usize>() == steps {
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
            let mut correct = 0;
            for (i, &label) in labels.iter().enumerate() {
                let per_model: Vec<ProbVector> = validation_tables.iter().map(|t| t.rows()[i].probs.clone()).collect();
                let fused = weighted_average(&per_model, &w)?;
                correct += usize::from(fused.argmax(TiePolicy::LowestIndex) == label);
            }
            if best.as_ref().is_none_or(|(b, _)| correct > *b) {
                best = Some((correct, w));
            }
        }
        // odometer increment over counts in [0, steps]
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(best.expect("simplex grid is non-empty").1);
            }
            pos -= 1;
            if counts[pos] < steps {
                counts[pos] += 1;
                break;
            }
            counts[pos] = 0;
        }
    }
}
