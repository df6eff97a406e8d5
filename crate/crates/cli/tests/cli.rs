use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "schema_version": 1,
  "p": [30],
  "repetitions": 2,
  "pca_dim": 10,
  "design": {"n_obs": 100, "n_train_test": 8, "n_calibration": 5, "n_nuisance": 4},
  "simulator": {"expected_degree": 2.0},
  "learner_params": {"l1": {"n_lambda": 10}, "nn": {"hidden": [8, 4], "epochs": 3}}
}"#;

fn ancestral(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ancestral"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ancestral(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.json"), SMALL).unwrap();
    dir
}

fn untimed_metrics(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v.as_object_mut().unwrap().remove("wall_ms");
            v.to_string()
        })
        .collect()
}

#[test]
fn pipeline_stages_chain_through_files() {
    let dir = workdir();
    let d = dir.path();
    let cfg = ["--config", "small.json", "--out", "run"];
    for stage in ["simulate", "featurize", "train", "predict"] {
        ok(d, &[&cfg[..], &[stage]].concat());
    }
    let report: serde_json::Value = serde_json::from_str(ok(d, &["--out", "run", "eval"]).trim()).unwrap();
    let auc = report["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let query = std::fs::read_to_string(d.join("run/query.csv")).unwrap();
    let n_query = query.lines().skip(3).count();
    assert_eq!(report["pairs"].as_u64().unwrap() as usize, n_query);

    let graph = std::fs::read_to_string(d.join("run/graph.csv")).unwrap();
    assert!(graph.starts_with("# ancestral-graph v1 p=30"));
    assert!(graph.contains(",background"));
    assert!(graph.contains(",predicted"));
    for file in ["data.csv", "roc.csv"] {
        let text = std::fs::read_to_string(d.join("run").join(file)).unwrap();
        assert!(text.starts_with("# config_hash="), "{file}");
    }
}

#[test]
fn correlation_baseline_predicts_without_a_model() {
    let dir = workdir();
    let d = dir.path();
    ok(d, &["--config", "small.json", "--out", "run", "simulate"]);
    ok(
        d,
        &[
            "--config",
            "small.json",
            "--out",
            "run",
            "--learner",
            "pearson",
            "predict",
        ],
    );
    ok(d, &["--out", "run", "eval"]);
    assert!(!d.join("run/model.bin").exists());
}

#[test]
fn exit_codes_separate_config_from_runtime_errors() {
    let dir = workdir();
    let d = dir.path();
    let code = |args: &[&str]| ancestral(d, args).status.code().unwrap();
    std::fs::write(d.join("bad.json"), r#"{"p": [30], "colour": "red"}"#).unwrap();
    assert_eq!(code(&["--config", "bad.json", "simulate"]), 2);
    assert_eq!(code(&["--config", "missing.json", "simulate"]), 2);
    assert_eq!(code(&["--config", "small.json", "--learner", "svm", "simulate"]), 2);
    assert_eq!(code(&["--config", "small.json", "--threads", "0", "simulate"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["--config", "small.json", "--learner", "kendall", "train"]), 2);
    assert_eq!(code(&["--out", "nothing-here", "eval"]), 3);
    assert_eq!(
        code(&["--config", "small.json", "--out", "nothing-here", "featurize"]),
        3
    );
}

#[test]
fn experiment_records_are_identical_across_thread_counts() {
    let dir = workdir();
    let d = dir.path();
    let one = ok(
        d,
        &[
            "--config",
            "small.json",
            "--out",
            "a",
            "--threads",
            "1",
            "--learner",
            "l1",
            "experiment",
        ],
    );
    ok(
        d,
        &[
            "--config",
            "small.json",
            "--out",
            "b",
            "--threads",
            "3",
            "--learner",
            "l1",
            "experiment",
        ],
    );
    assert!(one.starts_with("experiment,p,rho,method"));
    let a = untimed_metrics(&d.join("a/metrics.jsonl"));
    assert_eq!(a.len(), 2);
    assert_eq!(a, untimed_metrics(&d.join("b/metrics.jsonl")));
    assert_eq!(
        std::fs::read_to_string(d.join("a/summary.csv")).unwrap(),
        std::fs::read_to_string(d.join("b/summary.csv")).unwrap()
    );
    assert!(d.join("a/roc_avg/l1_p30_rho0.5.csv").exists());
    assert!(d.join("a/models/l1_p30_rho0.5_rep1.bin").exists());

    // a different master seed changes the records
    ok(
        d,
        &[
            "--config",
            "small.json",
            "--out",
            "c",
            "--seed",
            "7",
            "--learner",
            "l1",
            "experiment",
        ],
    );
    assert_ne!(a, untimed_metrics(&d.join("c/metrics.jsonl")));
}

#[test]
fn timing_writes_stage_tables() {
    let dir = workdir();
    let d = dir.path();
    let cfg = r#"{
      "experiment": "timing",
      "p": [20, 25],
      "pca_dim": 8,
      "design": {"n_obs": 60, "n_train_test": 6, "n_calibration": 4, "n_nuisance": 3},
      "learner_params": {"l1": {"n_lambda": 5}},
      "timing": {"repeats": 1, "train_p": 25, "train_size": 150, "query_sizes": [40, 400]}
    }"#;
    std::fs::write(d.join("timing.json"), cfg).unwrap();
    let stdout = ok(d, &["--config", "timing.json", "--out", "t", "timing"]);
    assert!(stdout.contains("total at largest p"));
    let stages = std::fs::read_to_string(d.join("t/timing_stages.csv")).unwrap();
    // two p values, six stages each, plus the stamp and the header
    assert_eq!(stages.lines().count(), 2 + 12);
    assert!(stages.contains("\n25,600,raw_features,"));
    let train = std::fs::read_to_string(d.join("t/timing_train.csv")).unwrap();
    assert!(train.contains("\n25,150,400,"));
}
