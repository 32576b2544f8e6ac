use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lolws(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lolws"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lolws")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lolws(dir, args);
    assert!(
        out.status.success(),
        "lolws {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

/// Small synthetic task plus a config pointing at it.
fn small_task(dir: &Path, classes: usize) {
    fs::write(
        dir.join("gen.json"),
        format!(
            r#"{{"numClasses": {classes}, "featureDim": 60, "numTrain": 300, "numValidation": 80,
                "numTest": 120, "numLabelers": 6, "keywordsPerLabeler": 3, "rngSeed": 11}}"#
        ),
    )
    .unwrap();
    ok(dir, &["synth", "--config", "gen.json", "--out", "task"]);
    fs::write(
        dir.join("lol.json"),
        r#"{"data": "task", "labelers": "task/labelers.json",
            "run": {"method": "LoL", "epochs": 3, "batchSize": 32, "hidden": [16, 8], "learningRate": 0.01}}"#,
    )
    .unwrap();
}

#[test]
fn run_writes_report_checkpoint_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    let stdout = ok(
        dir,
        &["run", "--config", "lol.json", "--seed", "3", "--out", "r"],
    );
    assert!(stdout.contains("test accuracy"));
    let report = read_json(dir.join("r/report.json"));
    assert!(report["testAccuracy"].as_f64().is_some());
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(
        fs::read_to_string(dir.join("r/metrics.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    assert!(dir.join("r/model.ckpt").exists());
    let manifest = read_json(dir.join("r/manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["configHash"].as_str().unwrap().len(), 64);
    assert!(manifest["inputs"].as_array().unwrap().len() >= 3);
}

#[test]
fn run_is_byte_identical_across_repeats() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    ok(
        dir,
        &["run", "--config", "lol.json", "--seed", "5", "--out", "a"],
    );
    ok(
        dir,
        &["run", "--config", "lol.json", "--seed", "5", "--out", "b"],
    );
    for f in ["report.json", "metrics.jsonl", "model.ckpt"] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let (ma, mb) = (
        read_json(dir.join("a/manifest.json")),
        read_json(dir.join("b/manifest.json")),
    );
    assert_eq!(ma["runId"], mb["runId"]);
    let digests = |m: &Value| -> Vec<Value> {
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].clone())
            .collect()
    };
    assert_eq!(digests(&ma), digests(&mb));
}

#[test]
fn flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    ok(
        dir,
        &[
            "run", "--config", "lol.json", "--method", "mv", "--epochs", "2", "--out", "r",
        ],
    );
    let report = read_json(dir.join("r/report.json"));
    assert_eq!(report["method"], "MV");
    assert_eq!(report["epochs"].as_array().unwrap().len(), 2);
}

#[test]
fn val_per_class_limits_validation_and_epochs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    fs::write(
        dir.join("small.json"),
        r#"{"data": "task", "labelers": "task/labelers.json", "run": {"method": "LoL-simple", "hidden": [8]}}"#,
    )
    .unwrap();
    ok(
        dir,
        &[
            "run",
            "--config",
            "small.json",
            "--val-per-class",
            "5",
            "--out",
            "r",
        ],
    );
    let report = read_json(dir.join("r/report.json"));
    assert_eq!(report["epochs"].as_array().unwrap().len(), 10);
    let acc = report["validationAccuracy"].as_f64().unwrap();
    assert_eq!(
        (acc * 10.0).round(),
        acc * 10.0,
        "accuracy over 10 examples: {acc}"
    );
}

#[test]
fn max_train_is_recorded_in_manifest() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    ok(
        dir,
        &[
            "run",
            "--config",
            "lol.json",
            "--max-train",
            "100",
            "--out",
            "r",
        ],
    );
    let manifest = read_json(dir.join("r/manifest.json"));
    let t = &manifest["details"]["truncation"];
    assert_eq!(t["maxTrainExamples"], 100);
    assert_eq!(t["availableTrainExamples"], 300);
    assert_eq!(t["usedTrainExamples"], 100);
    assert_eq!(manifest["config"]["run"]["maxTrainExamples"], 100);
    assert_eq!(read_json(dir.join("r/report.json"))["trainExamples"], 100);
}

#[test]
fn binary_only_methods_are_refused_on_four_classes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 4);
    let out = lolws(
        dir,
        &[
            "run", "--config", "lol.json", "--method", "T-Mean", "--out", "r",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("binary classification"), "{err}");
    assert!(!dir.join("r/report.json").exists());
}

#[test]
fn missing_corpus_exits_2_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let out = lolws(
        tmp.path(),
        &["featurize", "--corpus", "nope.jsonl", "--out", "cache"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));
}

#[test]
fn malformed_corpus_reports_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("c.jsonl"),
        "{\"text\": \"ok\", \"label\": 0}\n{oops\n",
    )
    .unwrap();
    let out = lolws(
        tmp.path(),
        &["featurize", "--corpus", "c.jsonl", "--out", "cache"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.jsonl:2"));
}

fn write_corpus(dir: &Path) {
    let mut lines = String::new();
    for i in 0..60 {
        let (text, y) = if i % 2 == 0 {
            (format!("good food number {i} tasty"), 1)
        } else {
            (format!("bad service number {i} awful"), 0)
        };
        lines.push_str(&format!("{{\"text\": \"{text}\", \"label\": {y}}}\n"));
    }
    fs::write(dir.join("corpus.jsonl"), lines).unwrap();
}

#[test]
fn featurize_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_corpus(dir);
    let stdout = ok(
        dir,
        &[
            "featurize",
            "--corpus",
            "corpus.jsonl",
            "--vocab-limit",
            "5000",
            "--out",
            "a",
        ],
    );
    assert!(stdout.contains("featurized 60 examples"));
    ok(
        dir,
        &[
            "featurize",
            "--corpus",
            "corpus.jsonl",
            "--vocab-limit",
            "5000",
            "--out",
            "b",
        ],
    );
    let (ma, mb) = (
        read_json(dir.join("a/manifest.json")),
        read_json(dir.join("b/manifest.json")),
    );
    let digests = |m: &Value| -> Vec<Value> {
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].clone())
            .collect()
    };
    assert_eq!(digests(&ma), digests(&mb));
    let schema = read_json(dir.join("a/schema.json"));
    assert!(schema["vocabulary"]
        .as_array()
        .unwrap()
        .contains(&Value::from("good")));
}

#[test]
fn featurize_then_label_with_word_keywords() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_corpus(dir);
    ok(
        dir,
        &[
            "featurize",
            "--corpus",
            "corpus.jsonl",
            "--val-per-class",
            "5",
            "--out",
            "cache",
        ],
    );
    fs::write(
        dir.join("lfs.json"),
        r#"[{"name": "pos", "kind": "keywordAny", "keywords": ["good", "tasty"], "class": 1},
            {"name": "neg", "kind": "keywordAny", "keywords": ["awful"], "class": 0},
            {"name": "neg2", "kind": "keywordAny", "keywords": ["bad"], "class": 0}]"#,
    )
    .unwrap();
    ok(
        dir,
        &[
            "label",
            "--data",
            "cache",
            "--labelers",
            "lfs.json",
            "--out",
            "lab",
        ],
    );
    let votes = read_json(dir.join("lab/votes.json"));
    assert_eq!(votes["labelers"].as_array().unwrap().len(), 3);
    assert_eq!(
        votes["rows"].as_array().unwrap().len(),
        read_json(dir.join("cache/train.json"))["examples"]
            .as_array()
            .unwrap()
            .len()
    );
    let val = read_json(dir.join("cache/validation.json"));
    assert_eq!(val["examples"].as_array().unwrap().len(), 10);
}

#[test]
fn ablate_two_methods_five_seeds() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    let args = [
        "ablate",
        "--config",
        "lol.json",
        "--methods",
        "LoL,LoL-simple",
        "--seeds",
        "5",
        "--epochs",
        "2",
    ];
    let stdout = ok(dir, &[&args[..], &["--out", "a"]].concat());
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3, "{stdout}");
    assert!(lines[1].starts_with("LoL ") && lines[1].contains(" ± "));
    assert!(lines[2].starts_with("LoL-simple ") && lines[2].contains(" ± "));
    let table = read_json(dir.join("a/ablation.json"));
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["testAccuracies"].as_array().unwrap().len(), 5);
    assert_eq!(rows[0]["seeds"], serde_json::json!([0, 1, 2, 3, 4]));

    ok(dir, &[&args[..], &["--out", "b", "--jobs", "2"]].concat());
    for f in ["ablation.json", "ablation.txt", "ablation.csv"] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_budget_writes_trials_and_best_config() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    let stdout = ok(
        dir,
        &[
            "sweep", "--config", "lol.json", "--budget", "20", "--epochs", "1", "--out", "s",
        ],
    );
    assert!(stdout.starts_with("20 trials"), "{stdout}");
    let trials: Vec<_> = fs::read_dir(dir.join("s/trials")).unwrap().collect();
    assert!(trials.len() <= 20 && !trials.is_empty());
    let best = read_json(dir.join("s/best-config.json"));
    assert_eq!(best["run"]["method"], "LoL");
    assert!(Path::new(best["data"].as_str().unwrap()).is_absolute());
    // The best config is itself a runnable config.
    ok(
        dir,
        &["run", "--config", "s/best-config.json", "--out", "rerun"],
    );
}

#[test]
fn report_renders_csv_and_rejects_empty_dirs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    ok(
        dir,
        &[
            "run", "--config", "lol.json", "--seed", "1", "--out", "runs/one",
        ],
    );
    ok(
        dir,
        &[
            "run", "--config", "lol.json", "--seed", "2", "--method", "SoftMV", "--out", "runs/two",
        ],
    );
    let csv = ok(dir, &["report", "runs", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    assert!(lines[0].starts_with("name,method,seed"));
    assert!(lines[1].contains(",LoL,1,") && lines[2].contains(",SoftMV,2,"));
    let text = ok(dir, &["report", "runs"]);
    assert!(text.starts_with("name"));

    fs::create_dir(dir.join("empty")).unwrap();
    let out = lolws(dir, &["report", "empty"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no reports"));
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    fs::write(
        dir.join("wild.json"),
        r#"{"data": "task", "labelers": "task/labelers.json",
            "run": {"method": "LoL-simple", "epochs": 3, "learningRate": 1e300, "batchSize": 16}}"#,
    )
    .unwrap();
    let out = lolws(dir, &["run", "--config", "wild.json", "--out", "r"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir, 2);
    fs::write(dir.join("bad.json"), r#"{"data": "task", "labelrs": "x"}"#).unwrap();
    let out = lolws(dir, &["run", "--config", "bad.json", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labelrs"));
}
