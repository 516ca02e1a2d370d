//! Seeded synthetic datasets and score generators for tests, examples and
//! demonstrations of the combiners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::learner::{Dataset, FeatureSet, LinearModel};
use crate::types::{LabelSpace, ProbVector, ScoreRow, ScoreTable};

fn gaussian_blobs(centers: &[(f64, f64)], sd: f64, n: usize, seed: u64) -> Dataset {
    let labels = LabelSpace::new((0..centers.len()).map(|c| format!("c{c}"))).expect("distinct names");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("positive sd");
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers.len();
        let (cx, cy) = centers[c];
        x.push(vec![cx + normal.sample(&mut rng), cy + normal.sample(&mut rng)]);
        y.push(c);
    }
    Dataset::new(labels, x, y).expect("well-formed blobs")
}

/// Two well-separated 2-D Gaussian blobs (centers ±(2, 2), sd 0.5),
/// alternating labels.
pub fn separable_blobs(n: usize, seed: u64) -> Dataset {
    gaussian_blobs(&[(-2.0, -2.0), (2.0, 2.0)], 0.5, n, seed)
}

/// Two overlapping 2-D blobs (centers ±(1, 0), sd 1) with each label flipped
/// with probability `flip`.
pub fn noisy_blobs(n: usize, flip: f64, seed: u64) -> Dataset {
    let clean = gaussian_blobs(&[(-1.0, 0.0), (1.0, 0.0)], 1.0, n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let y = clean
        .labels()
        .iter()
        .map(|&l| if rng.gen_bool(flip) { 1 - l } else { l })
        .collect();
    Dataset::new(clean.label_space().clone(), clean.features().to_vec(), y).expect("well-formed")
}

/// Three overlapping 2-D blobs on a line (centers -2, 0, 2 on the x axis,
/// sd 1); the middle class is hard for a single linear softmax model.
pub fn three_blobs(n: usize, seed: u64) -> Dataset {
    gaussian_blobs(&[(-2.0, 0.0), (0.0, 0.0), (2.0, 0.0)], 1.0, n, seed)
}

/// A random model, batch and l2 strength for gradient checks: 2–4 classes,
/// 1–5 features, 1–6 samples, entries in [-1, 1].
pub fn random_model_and_batch(rng: &mut impl Rng) -> (LinearModel, Vec<Vec<f64>>, Vec<usize>, f64) {
    let k = rng.gen_range(2..=4);
    let d = rng.gen_range(1..=5);
    let n = rng.gen_range(1..=6);
    let labels = LabelSpace::new((0..k).map(|c| format!("c{c}"))).expect("distinct names");
    let weights = (0..k * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bias = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let model = LinearModel::from_parts(labels, d, weights, bias).expect("finite");
    let x = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let l2 = rng.gen_range(0.0..0.5);
    (model, x, y, l2)
}

/// Hard votes of `models` independent classifiers, each correct with
/// probability `accuracy` and otherwise voting a uniformly random wrong class.
/// Returns `(truth, votes[model][sample])`.
pub fn independent_voters(n: usize, models: usize, classes: usize, accuracy: f64, seed: u64) -> (Vec<usize>, Vec<Vec<usize>>) {
    assert!(classes >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    let votes = (0..models)
        .map(|_| {
            truth
                .iter()
                .map(|&t| {
                    if rng.gen_bool(accuracy) {
                        t
                    } else {
                        let wrong = rng.gen_range(0..classes - 1);
                        if wrong >= t {
                            wrong + 1
                        } else {
                            wrong
                        }
                    }
                })
                .collect()
        })
        .collect();
    (truth, votes)
}

fn binary_row(correct: bool, truth: usize, confidence: f64) -> ProbVector {
    let predicted = if correct { truth } else { 1 - truth };
    let mut v = vec![1.0 - confidence; 2];
    v[predicted] = confidence;
    ProbVector::new(v).expect("valid binary distribution")
}

/// Two binary score tables over the same `n` labeled samples whose errors are
/// disjoint: model A errs on the first 30% (in a shuffled order), model B on
/// the next 30%. Correct rows carry confidence in [0.7, 1.0], wrong rows in
/// [0.5, 0.65], so averaging the two is always right.
pub fn complementary_score_tables(n: usize, seed: u64) -> Vec<ScoreTable> {
    let labels = LabelSpace::new(["neg", "pos"]).expect("static");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let cut = (n as f64 * 0.3).round() as usize;
    let mut wrong_a = vec![false; n];
    let mut wrong_b = vec![false; n];
    for &i in &order[..cut] {
        wrong_a[i] = true;
    }
    for &i in &order[cut..2 * cut] {
        wrong_b[i] = true;
    }
    [("expert_a", wrong_a), ("expert_b", wrong_b)]
        .into_iter()
        .map(|(id, wrong)| {
            let rows = (0..n)
                .map(|i| {
                    let conf = if wrong[i] { rng.gen_range(0.5..0.65) } else { rng.gen_range(0.7..1.0) };
                    ScoreRow {
                        sample_id: format!("s{i:05}"),
                        probs: binary_row(!wrong[i], truth[i], conf),
                        true_label: Some(truth[i]),
                    }
                })
                .collect();
            ScoreTable::new(labels.clone(), id, rows).expect("well-formed table")
        })
        .collect()
}

/// Half-space experts: features `x = (u, v)` in [-1, 1]² with `u < 0` for
/// even and `u > 0` for odd sample indices, labels uniformly random. Expert
/// A is right (confidence 0.9) wherever `u < 0`, expert B wherever `u > 0`.
/// Off its half each expert answers with confidence 0.99 and is right on
/// exactly every other such sample, so either
/// expert alone scores at most 75% while plain averaging is wrong whenever the
/// off-half expert is.
pub fn half_space_experts(n: usize, seed: u64) -> (FeatureSet, Vec<ScoreTable>) {
    let labels = LabelSpace::new(["neg", "pos"]).expect("static");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        ids.push(format!("s{i:05}"));
        let magnitude: f64 = rng.gen_range(1e-9..1.0);
        let u = if i % 2 == 0 { -magnitude } else { magnitude };
        x.push(vec![u, rng.gen_range(-1.0..1.0)]);
        truth.push(rng.gen_range(0..2usize));
    }
    let mut tables = Vec::new();
    for (id, home_is_left) in [("expert_a", true), ("expert_b", false)] {
        let mut off_count = 0usize;
        let rows = (0..n)
            .map(|i| {
                let home = (x[i][0] < 0.0) == home_is_left;
                let probs = if home {
                    binary_row(true, truth[i], 0.9)
                } else {
                    off_count += 1;
                    binary_row(off_count % 2 == 0, truth[i], 0.99)
                };
                ScoreRow {
                    sample_id: ids[i].clone(),
                    probs,
                    true_label: Some(truth[i]),
                }
            })
            .collect();
        tables.push(ScoreTable::new(labels.clone(), id, rows).expect("well-formed table"));
    }
    let features = FeatureSet::new(labels, ids, x, truth.into_iter().map(Some).collect()).expect("well-formed features");
    (features, tables)
}

/// Random labeled score table with `k` classes and `n` rows.
pub fn random_score_table(labels: &LabelSpace, model_id: &str, n: usize, rng: &mut impl Rng) -> ScoreTable {
    let k = labels.len();
    let rows = (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            ScoreRow {
                sample_id: format!("s{i:04}"),
                probs: crate::types::renormalize(&raw).expect("positive scores"),
                true_label: Some(rng.gen_range(0..k)),
            }
        })
        .collect();
    ScoreTable::new(labels.clone(), model_id, rows).expect("well-formed table")
}
