use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use std::io::Write;

fn mgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgm"))
        .args(args)
        .env_remove("MGM_SEED")
        .output()
        .unwrap()
}

const CHAIN_MODEL: &str = r#"{
  "format_version": 1,
  "n_categorical": 2,
  "n_quantitative": 2,
  "theta": [[-0.5, 0.5], [0.5, -1.0]],
  "mu": [0.0, 0.0],
  "delta": [[1.0, 0.25], [0.25, 1.0]],
  "phi": [[0.5, 0.0], [0.0, 0.5]]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_good_model_and_rejects_indefinite_precision() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", CHAIN_MODEL);
    let out = mgm(&["validate", &good]);
    assert_eq!(out.status.code(), Some(0));

    let bad = write(
        dir.path(),
        "bad.json",
        &CHAIN_MODEL.replace("[[1.0, 0.25], [0.25, 1.0]]", "[[1.0, 2.0], [2.0, 1.0]]"),
    );
    let out = mgm(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
}

#[test]
fn unreadable_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(mgm(&["validate", missing.to_str().unwrap()]).status.code(), Some(2));
    let garbage = write(dir.path(), "garbage.json", "{ not json");
    assert_eq!(mgm(&["validate", &garbage]).status.code(), Some(2));
    assert_eq!(mgm(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn sample_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", CHAIN_MODEL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = mgm(&["sample", &model, "-n", "100", "--seed", "5", "-o", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().next(), Some("t,c0,c1,q0,q1"));
    assert_eq!(text.lines().count(), 101);

    let gibbs = mgm(&["sample", &model, "-n", "10", "--seed", "5", "--method", "gibbs"]);
    assert_eq!(gibbs.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&gibbs.stdout).lines().count(), 11);
}

#[test]
fn detect_on_empty_input_emits_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", CHAIN_MODEL);
    let mut child = Command::new(env!("CARGO_BIN_EXE_mgm"))
        .args(["detect", &model, "--threshold", "5"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn detect_reports_malformed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", CHAIN_MODEL);
    let data = write(dir.path(), "data.csv", "t,c0,c1,q0,q1\n1,0,1,0.5,0.1\n2,0,7,0.5,0.1\n");
    let out = mgm(&["detect", &model, "--input", &data, "--threshold", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn experiment_artifacts_are_reproduced_by_detect() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "experiment.json",
        r#"{ "modification": { "parameter": "mu[1]", "value": 3.0 }, "seed": 8,
             "calibration": { "n_runs": 200 } }"#,
    );
    let out_dir = dir.path().join("out");
    let out = mgm(&["experiment", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["model.json", "data.csv", "trajectory.csv", "events.jsonl", "baseline.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    let h = stdout
        .lines()
        .find_map(|l| l.strip_prefix("threshold h = "))
        .unwrap()
        .to_string();

    let events = dir.path().join("events.jsonl");
    let trajectory = dir.path().join("trajectory.csv");
    let out = mgm(&[
        "detect",
        out_dir.join("model.json").to_str().unwrap(),
        "--input",
        out_dir.join("data.csv").to_str().unwrap(),
        "--threshold",
        &h,
        "--trajectory",
        trajectory.to_str().unwrap(),
        "-o",
        events.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&events).unwrap(), fs::read(out_dir.join("events.jsonl")).unwrap());
    assert_eq!(fs::read(&trajectory).unwrap(), fs::read(out_dir.join("trajectory.csv")).unwrap());
    assert!(fs::read_to_string(&events).unwrap().contains(r#""variable":"q1""#));

    let baseline = mgm(&[
        "baseline",
        out_dir.join("model.json").to_str().unwrap(),
        "--input",
        out_dir.join("data.csv").to_str().unwrap(),
    ]);
    assert_eq!(baseline.status.code(), Some(0));
    assert_eq!(baseline.stdout, fs::read(out_dir.join("baseline.csv")).unwrap());
}

#[test]
fn calibrate_prints_a_threshold_and_respects_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", CHAIN_MODEL);
    let flag = mgm(&["calibrate", &model, "--runs", "200", "--seed", "4"]);
    assert_eq!(flag.status.code(), Some(0));
    let h: f64 = String::from_utf8_lossy(&flag.stdout).trim().parse().unwrap();
    assert!(h > 0.0);
    let env = Command::new(env!("CARGO_BIN_EXE_mgm"))
        .args(["calibrate", &model, "--runs", "200"])
        .env("MGM_SEED", "4")
        .output()
        .unwrap();
    assert_eq!(env.stdout, flag.stdout);
    let invalid = mgm(&["calibrate", &model, "--runs", "10"]);
    assert_eq!(invalid.status.code(), Some(1));
}
