use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tckae::DenseMatrix;
use tempfile::TempDir;

fn tckae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tckae")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = tckae(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("data-{n}-{seed}.csv"));
    ok(&["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "-o", s(&path)]);
    path
}

fn tck(data: &Path, out: &Path, seed: u64) {
    ok(&[
        "tck", "--data", s(data), "-o", s(out), "--components", "3", "--realizations", "2",
        "--seed", &seed.to_string(),
    ]);
}

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--data", s(data), "-o", s(out), "--epochs", "5", "--hidden", "16", "--code", "4"];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_writes_header_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["synth", "--seed", "3", "-o", s(&a)]);
    ok(&["synth", "--seed", "3", "-o", s(&b)]);
    let text = fs::read(&a).unwrap();
    assert!(text.starts_with(b"600,20,10,1\n"));
    assert_eq!(text, fs::read(&b).unwrap());
}

#[test]
fn infeasible_synth_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let out = tckae(&["synth", "--missing", "0.999", "-o", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(tckae(&["synth", "--bogus"]).status.code(), Some(1));
    assert_eq!(tckae(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tckae(&["--help"]).status.code(), Some(0));
}

#[test]
fn tck_writes_psd_kernels_reproducibly() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), 60, 1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    tck(&data, &a, 7);
    tck(&data, &b, 7);
    for f in ["tck_model.json", "K_train.csv", "K_test_train.csv", "K_test.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let k = DenseMatrix::read_csv(&a.join("K_train.csv")).unwrap();
    assert_eq!(k.shape(), (48, 48));
    assert!(k.is_symmetric(1e-12));
    let min = k.symmetric_eigenvalues().unwrap().into_iter().fold(f64::INFINITY, f64::min);
    assert!(min > -1e-8, "min eigenvalue {min}");
    assert_eq!(DenseMatrix::read_csv(&a.join("K_test_train.csv")).unwrap().shape(), (12, 48));

    let c = dir.path().join("c");
    tck(&data, &c, 8);
    assert_ne!(fs::read(a.join("K_train.csv")).unwrap(), fs::read(c.join("K_train.csv")).unwrap());
}

#[test]
fn missing_input_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = tckae(&["tck", "--data", s(&missing), "-o", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn train_without_alignment_ignores_the_kernel() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), 60, 2);
    let k = dir.path().join("k");
    tck(&data, &k, 1);
    let garbage = dir.path().join("garbage.csv");
    let n = 48;
    let rows: Vec<String> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { "1" } else { "0.25" }).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(&garbage, rows.join("\n") + "\n").unwrap();

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    train(&data, &a, &["--lambda", "0", "--kernel", s(&k.join("K_train.csv"))]);
    train(&data, &b, &["--lambda", "0", "--kernel", s(&garbage)]);
    train(&data, &c, &["--lambda", "0"]);
    let codes = |d: &Path| fs::read(d.join("codes_test.csv")).unwrap();
    assert_eq!(codes(&a), codes(&b));
    assert_eq!(codes(&a), codes(&c));

    let aligned = dir.path().join("aligned");
    train(&data, &aligned, &["--lambda", "0.5", "--kernel", s(&k.join("K_train.csv"))]);
    assert_ne!(codes(&a), codes(&aligned));
    let again = dir.path().join("again");
    train(&data, &again, &["--lambda", "0.5", "--kernel", s(&k.join("K_train.csv"))]);
    assert_eq!(codes(&aligned), codes(&again));
    assert_eq!(fs::read(aligned.join("checkpoint.json")).unwrap(), fs::read(again.join("checkpoint.json")).unwrap());
}

#[test]
fn aligned_training_needs_a_kernel() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), 60, 3);
    let out = tckae(&["train", "--data", s(&data), "-o", s(&dir.path().join("o")), "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn imputation_changes_the_codes() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), 60, 4);
    let z = dir.path().join("z");
    let l = dir.path().join("l");
    train(&data, &z, &["--lambda", "0", "--impute", "zero"]);
    train(&data, &l, &["--lambda", "0", "--impute", "locf"]);
    assert_ne!(fs::read(z.join("codes_test.csv")).unwrap(), fs::read(l.join("codes_test.csv")).unwrap());
    let history = fs::read_to_string(z.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 6);
}

#[test]
fn eval_reports_codes_and_kernel() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), 60, 5);
    let runs = dir.path().join("runs");
    train(&data, &runs.join("run_000"), &["--lambda", "0"]);
    let rep = dir.path().join("rep");
    ok(&["eval", "--data", s(&data), "--dir", s(&runs), "--runs", "1", "-o", s(&rep)]);
    let csv = fs::read_to_string(rep.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,mse,mse_std,f1,f1_std,auc,auc_std"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "AE-z");
    assert_eq!(row[2], "0.000000");
    assert_eq!(row[4], "0.000000");
    assert_eq!(row[6], "0.000000");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    assert!(json.is_array() || json.is_object());

    let k = dir.path().join("k");
    tck(&data, &k, 2);
    let krep = dir.path().join("krep");
    ok(&["eval", "--data", s(&data), "--dir", s(&k), "--tck-input", "-o", s(&krep)]);
    let row = fs::read_to_string(krep.join("report.csv")).unwrap();
    let row: Vec<&str> = row.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..3], &["TCK-i", "", ""]);
}

#[test]
fn projections_have_labels_and_agree_for_linear_kernels() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), 60, 6);
    let net = dir.path().join("net");
    train(&data, &net, &["--lambda", "0"]);
    let codes = DenseMatrix::read_csv(&net.join("codes_test.csv")).unwrap();
    let linear = dir.path().join("linear.csv");
    codes.gram().write_csv(&linear).unwrap();

    let pca = dir.path().join("pca.csv");
    let kpca = dir.path().join("kpca.csv");
    ok(&["project", "--mode", "pca-codes", "--input", s(&net.join("codes_test.csv")), "--data", s(&data), "-o", s(&pca)]);
    ok(&["project", "--mode", "kpca-kernel", "--input", s(&linear), "--data", s(&data), "-o", s(&kpca)]);
    let p = DenseMatrix::read_csv(&pca).unwrap();
    let q = DenseMatrix::read_csv(&kpca).unwrap();
    assert_eq!(p.shape(), (12, 3));
    assert_eq!(q.shape(), (12, 3));
    for i in 0..12 {
        assert!(p.get(i, 2) == 0.0 || p.get(i, 2) == 1.0);
        assert_eq!(p.get(i, 2), q.get(i, 2));
    }
    // gram of uncentered codes centres to the PCA covariance, so the
    // coordinates agree up to a per-axis sign
    for c in 0..2 {
        let same = (0..12).all(|i| (p.get(i, c) - q.get(i, c)).abs() < 1e-6);
        let flip = (0..12).all(|i| (p.get(i, c) + q.get(i, c)).abs() < 1e-6);
        assert!(same || flip, "axis {c} differs");
    }
}

#[test]
fn pipeline_produces_all_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"synth": {"n": 80}, "runs": 2, "tck": {"max_components": 3, "realizations": 2, "min_segment": 6, "min_attributes": 2},
            "train": {"epochs": 3}, "hidden": [8], "code": 4, "lambda_sweep": [0.25]}"#,
    )
    .unwrap();
    let out = dir.path().join("exp");
    ok(&["pipeline", "--config", s(&cfg), "-o", s(&out), "--seed", "5"]);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["AE-z", "dkAE-z", "AE-m", "dkAE-m", "AE-l", "dkAE-l", "TCK-i"]);
    assert!(out.join("sweep.csv").exists());
    assert!(out.join("projections/kpca_tck.csv").exists());
    assert!(out.join("run_001/dkae-l/codes_test.csv").exists());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"epochs_typo": 3}"#).unwrap();
    assert_eq!(tckae(&["pipeline", "--config", s(&bad), "-o", s(&out)]).status.code(), Some(2));
}
