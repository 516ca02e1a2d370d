use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ef(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ef"))
        .args(args)
        .current_dir(dir)
        .env_remove("EF_SEED")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_random_table(path: &Path, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("sample_id,true_label,a,b,c\n");
    let mut rows = Vec::new();
    for i in 0..n {
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(1..1000) as f64).collect();
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let label = ["a", "b", "c"][i % 3];
        text += &format!("id{i},{label},{},{},{}\n", p[0], p[1], p[2]);
        rows.push(p);
    }
    fs::write(path, text).unwrap();
    rows
}

fn read_probs(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fuse_avg_matches_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_random_table(&tmp.path().join("a.csv"), 30, 1);
    let b = write_random_table(&tmp.path().join("b.csv"), 30, 2);
    let out = ef(tmp.path(), &["fuse", "--method", "avg", "--scores", "a.csv", "b.csv", "--out", "f.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fused = read_probs(&tmp.path().join("f.csv"));
    assert_eq!(fused.len(), 30);
    for ((f, x), y) in fused.iter().zip(&a).zip(&b) {
        for c in 0..3 {
            let want = (x[c] + y[c]) / 2.0;
            // written with 12 significant digits
            assert!((f[c] - want).abs() <= 5e-12 * want, "{} vs {want}", f[c]);
        }
    }
}

#[test]
fn wavg_without_weights_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_table(&tmp.path().join("a.csv"), 5, 1);
    write_random_table(&tmp.path().join("b.csv"), 5, 2);
    let out = ef(tmp.path(), &["fuse", "--method", "wavg", "--scores", "a.csv", "b.csv", "--out", "f.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).lines().any(|l| l.starts_with("error code=USAGE")));
    assert!(!tmp.path().join("f.csv").exists());
}

#[test]
fn explicit_weights_fuse_and_bad_weights_fail() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_table(&tmp.path().join("a.csv"), 5, 1);
    write_random_table(&tmp.path().join("b.csv"), 5, 2);
    let ok = ef(tmp.path(), &["fuse", "--method", "wavg", "--scores", "a.csv", "b.csv", "--weights", "0.25,0.75", "--out", "f.csv"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    let bad = ef(tmp.path(), &["fuse", "--method", "wavg", "--scores", "a.csv", "b.csv", "--weights", "0.5,0.6", "--out", "g.csv"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!tmp.path().join("g.csv").exists());
    let junk = ef(tmp.path(), &["fuse", "--method", "wavg", "--scores", "a.csv", "b.csv", "--weights", "x", "--out", "g.csv"]);
    assert_eq!(junk.status.code(), Some(1));
}

#[test]
fn help_exits_zero_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ef(tmp.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for (cmd, flag) in [
        ("split", "--ratio"),
        ("preprocess", "--augment"),
        ("features", "--side"),
        ("train-base", "--epochs"),
        ("oof", "--folds"),
        ("predict", "--model"),
        ("bag", "--replicates"),
        ("boost", "--rounds"),
        ("fuse", "--weights"),
        ("cascade", "--threshold"),
        ("eval", "--report"),
    ] {
        let out = ef(tmp.path(), &[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stdout).contains(flag), "{cmd} help lacks {flag}");
    }
}

#[test]
fn unknown_flags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ef(tmp.path(), &["eval", "--scores", "x.csv", "--report", "r.json", "--colour"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2_and_leave_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "sample_id,true_label,a,b\nx,a,0.9,0.9\n").unwrap();
    let out = ef(tmp.path(), &["eval", "--scores", "bad.csv", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    let line = stderr(&out);
    assert!(line.starts_with("error code=") && line.trim_end().lines().count() == 1, "{line}");
    assert!(!tmp.path().join("r.json").exists());

    fs::write(tmp.path().join("unlabeled.csv"), "sample_id,true_label,a,b\nx,,0.5,0.5\n").unwrap();
    let out = ef(tmp.path(), &["eval", "--scores", "unlabeled.csv", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("code=MISSING_LABELS"));
}

#[test]
fn degenerate_boosting_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // identical features, opposite labels: the first round is at chance
    fs::write(tmp.path().join("f.csv"), "sample_id,label,f0\na,no,1\nb,yes,1\n").unwrap();
    let out = ef(tmp.path(), &["boost", "--features", "f.csv", "--rounds", "3", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("code=DEGENERATE_FIRST_ROUND"));
    assert!(!tmp.path().join("m.json").exists());
}

fn write_manifest(dir: &Path, n: usize) {
    let mut text = String::from("sample_id,path,label\n");
    for i in 0..n {
        text += &format!("s{i},img{i}.png,{}\n", if i % 2 == 0 { "no" } else { "yes" });
    }
    fs::write(dir.join("manifest.csv"), text).unwrap();
}

#[test]
fn seed_comes_from_flag_then_env_then_default() {
    let tmp = tempfile::tempdir().unwrap();
    write_manifest(tmp.path(), 40);
    let run = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ef"));
        cmd.args(args).current_dir(tmp.path()).env_remove("EF_SEED");
        if let Some(v) = env {
            cmd.env("EF_SEED", v);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read_to_string(tmp.path().join(args.last().unwrap())).unwrap()
    };
    let base = ["split", "--manifest", "manifest.csv", "--out"];
    let default = run(&[&base[..], &["d.csv"]].concat(), None);
    let explicit42 = run(&["split", "--manifest", "manifest.csv", "--seed", "42", "--out", "e.csv"], None);
    let env7 = run(&[&base[..], &["g.csv"]].concat(), Some("7"));
    let flag7 = run(&["split", "--manifest", "manifest.csv", "--seed", "7", "--out", "h.csv"], Some("9"));
    assert_eq!(default, explicit42);
    assert_eq!(env7, flag7);
    assert_ne!(default, env7);
}

#[test]
fn image_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_manifest(dir, 20);
    for i in 0..20 {
        // "yes" images have a bright stripe
        let img = image::GrayImage::from_fn(9, 7, |x, _| image::Luma([if i % 2 == 1 && x < 3 { 230 } else { 40 + (x * 3) as u8 }]));
        img.save(dir.join(format!("img{i}.png"))).unwrap();
    }
    let ok = |args: &[&str]| {
        let out = ef(dir, args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    };
    ok(&["split", "--manifest", "manifest.csv", "--ratio", "0.5", "--out", "split.csv"]);
    let refused = ef(dir, &["preprocess", "--manifest", "manifest.csv", "--augment", "rot90", "--out", "prep"]);
    assert_eq!(refused.status.code(), Some(1));
    ok(&["preprocess", "--manifest", "manifest.csv", "--split", "split.csv", "--size", "8", "--augment", "rot90,flip-h", "--out", "prep"]);
    let manifest = fs::read_to_string(dir.join("prep/manifest.csv")).unwrap();
    // 10 train samples x 8 variants + 10 untouched test samples
    assert_eq!(manifest.lines().count() - 1, 90);
    ok(&["features", "--manifest", "prep/manifest.csv", "--side", "4", "--out", "feats.csv"]);
    ok(&["train-base", "--features", "feats.csv", "--split", "split.csv", "--partition", "train", "--epochs", "20", "--out", "m.json"]);
    ok(&["predict", "--model", "m.json", "--features", "feats.csv", "--split", "split.csv", "--partition", "test", "--out", "p.csv"]);
    let scores = fs::read_to_string(dir.join("p.csv")).unwrap();
    assert_eq!(scores.lines().count() - 1, 10);
    assert!(scores.lines().skip(1).all(|l| !l.contains('#')), "test rows must not be augmented");
    ok(&["eval", "--scores", "p.csv", "--report", "r.json"]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["measured"]["metrics"]["samples"], 10);
}
