//! Library results checked against straightforward reimplementations.

use ensemble_fusion::combiners::boosting::boosting_train_traced;
use ensemble_fusion::combiners::stacking::out_of_fold_scores;
use ensemble_fusion::score_io::{read_score_table, write_score_table};
use ensemble_fusion::synthetic::{random_score_table, three_blobs};
use ensemble_fusion::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tables(n: usize, models: usize, seed: u64) -> Vec<ScoreTable> {
    let labels = LabelSpace::tumor_types();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..models).map(|m| random_score_table(&labels, &format!("m{m}"), n, &mut rng)).collect()
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[test]
fn average_and_weighted_fusion() {
    let t = tables(50, 3, 5);
    let w = [0.2, 0.3, 0.5];
    let avg = fuse_tables(&t, &Fusion::Average, "avg").unwrap();
    let wavg = fuse_tables(&t, &Fusion::Weighted(w.to_vec()), "wavg").unwrap();
    for i in 0..50 {
        for c in 0..4 {
            let xs: Vec<f64> = t.iter().map(|tb| tb.rows()[i].probs.as_slice()[c]).collect();
            let mean = xs.iter().sum::<f64>() / 3.0;
            let weighted: f64 = xs.iter().zip(w).map(|(x, w)| x * w).sum();
            assert!((avg.rows()[i].probs.as_slice()[c] - mean).abs() < 1e-12);
            assert!((wavg.rows()[i].probs.as_slice()[c] - weighted).abs() < 1e-12);
        }
    }
}

#[test]
fn majority_and_max_fusion() {
    let t = tables(80, 3, 9);
    let maj = fuse_tables(&t, &Fusion::Majority(TiePolicy::LowestIndex), "maj").unwrap();
    let max = fuse_tables(&t, &Fusion::Max(TiePolicy::LowestIndex), "max").unwrap();
    for i in 0..80 {
        let mut counts = [0usize; 4];
        let mut best = (0, f64::MIN);
        for tb in &t {
            let p = tb.rows()[i].probs.as_slice();
            counts[argmax_first(p)] += 1;
            for (c, &x) in p.iter().enumerate() {
                if x > best.1 {
                    best = (c, x);
                }
            }
        }
        let voted = argmax_first(&counts.map(|c| c as f64));
        assert_eq!(argmax_first(maj.rows()[i].probs.as_slice()), voted);
        assert_eq!(maj.rows()[i].probs.as_slice()[voted], 1.0);
        assert_eq!(argmax_first(max.rows()[i].probs.as_slice()), best.0);
    }
}

#[test]
fn score_tables_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for t in tables(20, 2, 3) {
        let path = dir.path().join(format!("{}.csv", t.model_id()));
        write_score_table(&t, &path).unwrap();
        let back = read_score_table(&path).unwrap();
        assert_eq!(back.len(), t.len());
        for (a, b) in back.rows().iter().zip(t.rows()) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.true_label, b.true_label);
            for (x, y) in a.probs.as_slice().iter().zip(b.probs.as_slice()) {
                assert!((x - y).abs() <= 1e-11 * y.max(1e-300));
            }
        }
    }
}

#[test]
fn confusion_and_metrics_by_hand() {
    let t = &tables(120, 1, 21)[0];
    let cm = confusion(t, TiePolicy::LowestIndex).unwrap();
    let mut counts = [[0usize; 4]; 4];
    for r in t.rows() {
        counts[r.true_label.unwrap()][argmax_first(r.probs.as_slice())] += 1;
    }
    let m = metrics(&cm).unwrap();
    let diag: usize = (0..4).map(|c| counts[c][c]).sum();
    assert!((m.accuracy - diag as f64 / 120.0).abs() < 1e-15);
    let mut f1_sum = 0.0;
    for c in 0..4 {
        let tp = counts[c][c] as f64;
        let pred: f64 = (0..4).map(|r| counts[r][c] as f64).sum();
        let actual: f64 = counts[c].iter().sum::<usize>() as f64;
        let p = if pred > 0.0 { tp / pred } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        f1_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    assert!((m.macro_f1 - f1_sum / 4.0).abs() < 1e-12);
}

#[test]
fn boosting_alphas_follow_the_round_errors() {
    let data = three_blobs(90, 4);
    let config = TrainConfig { epochs: 5, ..TrainConfig::default() };
    let (ens, trace) = boosting_train_traced(&data, 6, &config).unwrap();
    assert!(!ens.stages().is_empty());
    for (stage, round) in ens.stages().iter().zip(&trace.rounds) {
        let e = round.error.max(1e-10);
        let expected = ((1.0 - e) / e).ln() + 2f64.ln();
        assert!((stage.alpha - expected).abs() < 1e-12);
        assert_eq!(round.alpha, stage.alpha);
    }
}

#[test]
fn out_of_fold_rows_were_never_seen_by_their_scorer() {
    let data = three_blobs(60, 8);
    let ids: Vec<String> = (0..60).map(|i| format!("r{i}")).collect();
    let set = FeatureSet::new(
        data.label_space().clone(),
        ids,
        data.features().to_vec(),
        data.labels().iter().map(|&y| Some(y)).collect(),
    )
    .unwrap();
    let config = TrainConfig { epochs: 5, ..TrainConfig::default() };
    let oof = out_of_fold_scores(&set, 5, &config, "oof").unwrap();
    assert!(oof.is_out_of_fold());
    for (f, train) in oof.fold_train_ids.iter().enumerate() {
        let held = oof.fold_of_row.iter().filter(|&&g| g == f).count();
        assert_eq!(train.len() + held, 60);
    }
}
