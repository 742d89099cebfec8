use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn abstain(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abstain"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = abstain(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

/// Rows of a CSV with a header, as `column -> value` lookups.
fn rows(csv: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = csv.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn field(row: &[(String, String)], key: &str) -> String {
    row.iter().find(|(k, _)| k == key).unwrap().1.clone()
}

fn num(row: &[(String, String)], key: &str) -> f64 {
    field(row, key).parse().unwrap()
}

fn synth_small(dir: &Path) {
    ok(dir, &["synth", "--m-train", "200", "--m-test", "2000", "--out", "d"]);
}

#[test]
fn synth_defaults_match_experiment_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["synth", "--out", "full"]);
    assert!(out.starts_with("file,rows\n"));
    let count = |f: &str| fs::read_to_string(dir.path().join("full").join(f)).unwrap().lines().count();
    assert_eq!(count("train.svm"), 12_800);
    assert_eq!(count("test.svm"), 10_000);
    assert_eq!(count("prototypes.csv"), 9);
}

#[test]
fn synth_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--m-train", "200", "--m-test", "50", "--seed", "4", "--out", "a"]);
    ok(dir.path(), &["synth", "--m-train", "200", "--m-test", "50", "--seed", "4", "--out", "b"]);
    ok(dir.path(), &["synth", "--m-train", "200", "--m-test", "50", "--seed", "5", "--out", "c"]);
    let read = |d: &str| fs::read(dir.path().join(d).join("train.svm")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(String::from_utf8(read("a")).unwrap().lines().count(), 200);
}

#[test]
fn bep_training_reaches_the_gap_target() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let out = ok(
        dir.path(),
        &["train", "--surrogate", "bep", "--kernel", "gaussian", "--gamma", "1", "--lambda", "0.01", "--in", "d/train.svm", "--out", "bep.json"],
    );
    let r = &rows(&out)[0];
    assert_eq!(field(r, "converged"), "true");
    assert!(num(r, "gap") <= 1e-6 * (1.0 + num(r, "objective").abs()));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bep.json")).unwrap()).unwrap();
    assert_eq!(model["kind"], "bep");
    assert_eq!(model["tau"], 0.0);
    assert_eq!(model["beta"][0].as_array().unwrap().len(), 3);
}

#[test]
fn ova_and_cs_take_their_solver_paths() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let out = ok(dir.path(), &["train", "--surrogate", "ova", "--in", "d/train.svm", "--out", "ova.json"]);
    assert_eq!(field(&rows(&out)[0], "solver"), "dual");
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ova.json")).unwrap()).unwrap();
    assert_eq!(model["beta"][0].as_array().unwrap().len(), 8);
    assert_eq!(model["tau"], -1.0);

    let out = ok(dir.path(), &["train", "--surrogate", "cs", "--in", "d/train.svm", "--out", "cs.json", "--steps", "300"]);
    let r = &rows(&out)[0];
    assert_eq!(field(r, "solver"), "subgradient");
    assert!(num(r, "objective") < 200.0);
}

#[test]
fn eval_reject_targets() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    ok(dir.path(), &["train", "--surrogate", "bep", "--in", "d/train.svm", "--out", "bep.json"]);
    // τ = 0 on generic scores never rejects
    let r = &rows(&ok(dir.path(), &["eval", "--model", "bep.json", "--in", "d/test.svm"]))[0];
    assert_eq!(num(r, "reject"), 0.0);
    assert_eq!(num(r, "m"), 2000.0);

    let r = &rows(&ok(dir.path(), &["eval", "--model", "bep.json", "--in", "d/test.svm", "--target-reject", "0"]))[0];
    assert_eq!(num(r, "calib_reject"), 0.0);
    assert_eq!(num(r, "reject"), 0.0);

    let r = &rows(&ok(dir.path(), &["eval", "--model", "bep.json", "--in", "d/test.svm", "--target-reject", "0.4"]))[0];
    assert!((num(r, "calib_reject") - 0.4).abs() <= 1e-3);
    assert_eq!(num(r, "m"), 1000.0);
    assert!((num(r, "risk") - num(r, "error") - 0.5 * num(r, "reject")).abs() < 1e-12);
}

#[test]
fn calibrate_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    ok(dir.path(), &["train", "--surrogate", "ova", "--in", "d/train.svm", "--out", "ova.json"]);
    let r = &rows(&ok(
        dir.path(),
        &["calibrate", "--model", "ova.json", "--in", "d/test.svm", "--target-reject", "0.2", "--out", "ova2.json"],
    ))[0];
    assert!((num(r, "reject") - 0.2).abs() <= 1.0 / 2000.0);
    let preds = ok(dir.path(), &["predict", "--model", "ova2.json", "--in", "d/test.svm"]);
    let preds = rows(&preds);
    assert_eq!(preds.len(), 2000);
    let rejected = preds.iter().filter(|r| field(r, "prediction") == "reject").count();
    assert_eq!(rejected as f64 / 2000.0, num(r, "reject"));
}

#[test]
fn sweep_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--surrogate", "bep", "--m-grid", "50,100", "--tau-grid", "0,0.5", "--m-test", "500", "--samples", "2000",
    ];
    let a = ok(dir.path(), &args);
    let b = ok(dir.path(), &args);
    assert_eq!(a, b);
    let r = rows(&a);
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|row| field(row, "bayes_risk") == field(&r[0], "bayes_risk")));
    assert!(r.iter().filter(|row| field(row, "tau") == "0").all(|row| num(row, "reject") == 0.0));

    let single = ok(dir.path(), &["sweep", "--m-grid", "50", "--tau-grid", "0.5", "--m-test", "100", "--samples", "100"]);
    assert_eq!(rows(&single).len(), 1);
}

#[test]
fn verify_passes_and_reports_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["verify", "--samples", "5000"]);
    let r = rows(&out);
    assert_eq!(r.len(), 3 * 3 * 5);
    assert!(r.iter().all(|row| field(row, "pass") == "true" && num(row, "min_slack") >= -1e-9));

    let out = ok(dir.path(), &["verify", "--kind", "bep", "--n", "8", "--samples", "20000"]);
    for row in rows(&out) {
        for case in ["hits_1a", "hits_1b", "hits_1c", "hits_2a", "hits_2b"] {
            assert!(num(&row, case) > 0.0);
        }
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = abstain(dir.path(), &["verify", "--surrogate", "cs", "--tau", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("calibrated interval"));
    let o = abstain(dir.path(), &["train"]);
    assert_eq!(o.status.code(), Some(2));
    let o = abstain(dir.path(), &["train", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = abstain(dir.path(), &["eval", "--model", "missing.json", "--in", "x.svm"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn partition_tables() {
    let dir = tempfile::tempdir().unwrap();
    let simplex = |alpha: &str| rows(&ok(dir.path(), &["partition", "--figure", "simplex", "--alpha", alpha]));
    let half = simplex("0.5");
    assert_eq!(half.len(), 51 * 52 / 2);
    assert!(half.iter().any(|r| field(r, "region") == "4"));
    assert!(simplex("0.9").iter().all(|r| field(r, "region") != "4"));

    let scores = rows(&ok(dir.path(), &["partition", "--figure", "scores", "--tau", "0.5", "--resolution", "21"]));
    assert_eq!(scores.len(), 21 * 21);
    let regions: std::collections::BTreeSet<String> = scores.iter().map(|r| field(r, "region")).collect();
    assert_eq!(regions.len(), 5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    fs::write(dir.path().join("run.conf"), "# training\nsurrogate = ova\nlambda = 0.5\nin = d/train.svm\n").unwrap();
    ok(dir.path(), &["train", "--config", "run.conf", "--lambda", "0.25", "--out", "m.json"]);
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(model["kind"], "ova");
    assert_eq!(model["lambda"], 0.25);

    fs::write(dir.path().join("bad.conf"), "unknown_key = 1\n").unwrap();
    let o = abstain(dir.path(), &["train", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(2));
}
