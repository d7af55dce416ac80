use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_voxdx");

const SPEC: &str = r#"
seed = 3
duration_s = 0.5
sample_rate = 16000

[[classes]]
label = "normal"
count = 6
f0 = [100.0, 140.0]
jitter = [0.002, 0.005]
shimmer = [0.01, 0.03]
hnr_db = [28.0, 35.0]

[[classes]]
label = "neoplasm"
count = 6
f0 = [80.0, 110.0]
jitter = [0.03, 0.05]
shimmer = [0.1, 0.15]
hnr_db = [4.0, 8.0]

[[classes]]
label = "phonotrauma"
count = 6
f0 = [200.0, 260.0]
jitter = [0.008, 0.015]
shimmer = [0.15, 0.2]
hnr_db = [15.0, 20.0]

[[classes]]
label = "vocal_palsy"
count = 6
f0 = [150.0, 190.0]
jitter = [0.08, 0.12]
shimmer = [0.04, 0.08]
hnr_db = [1.0, 4.0]
"#;

const SMALL: &str = r#"
[shac]
budget = 20
batch = 5
max_classifiers = 2
final_batch = 5

[cv]
k = 3
"#;

const MEMORIZE: &str = r#"{
  "format": "voxdx-hyperparams",
  "version": 1,
  "hyperparams": {
    "kind": "svm-pipeline",
    "rf_trees": 20,
    "rf_depth": null,
    "sel_threshold": 0.0,
    "svm_c": 25.0,
    "gamma_raw": -1.0
  },
  "tune_seed": 1,
  "eval_seed": 0,
  "eval_score": 0.0,
  "fallback": false
}
"#;

fn voxdx(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = voxdx(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn corpus() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.toml"), SPEC).unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    std::fs::write(dir.path().join("memorize.json"), MEMORIZE).unwrap();
    ok(
        dir.path(),
        &["synth", "--out", "corpus", "--spec", "spec.toml"],
    );
    ok(
        dir.path(),
        &[
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "feats.json",
        ],
    );
    dir
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn width(cache: &serde_json::Value) -> usize {
    cache["table"]["rows"][0]["features"]
        .as_array()
        .unwrap()
        .len()
}

#[test]
fn workflow_on_small_corpus() {
    let dir = corpus();
    let d = dir.path();
    let manifest = std::fs::read_to_string(d.join("corpus/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 24);
    let cache = json(&d.join("feats.json"));
    assert_eq!(cache["table"]["rows"].as_array().unwrap().len(), 24);
    assert_eq!(width(&cache), 45);

    ok(
        d,
        &[
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "feats13.json",
            "--n-mfcc",
            "13",
        ],
    );
    assert_eq!(width(&json(&d.join("feats13.json"))), 39);

    // --budget may lower the configured budget but never raise it
    ok(
        d,
        &[
            "--config",
            "small.toml",
            "tune",
            "--cache",
            "feats.json",
            "--out",
            "hp.json",
            "--budget",
            "1000",
        ],
    );
    let log = std::fs::read_to_string(d.join("hp.log")).unwrap();
    let rows = log.lines().skip(1).filter(|l| !l.starts_with('#')).count();
    assert!(rows > 0 && rows <= 20, "{rows} evaluations logged");
    assert!(log.starts_with("stage,rf_trees,rf_depth,sel_threshold,svm_c,gamma_raw,score"));
    let hp = json(&d.join("hp.json"));
    assert_eq!(hp["hyperparams"]["kind"], "svm-pipeline");

    let table = ok(
        d,
        &[
            "--config",
            "small.toml",
            "evaluate",
            "--cache",
            "feats.json",
            "--hyperparams",
            "hp.json",
            "--out",
            "report.json",
            "--k",
            "3",
        ],
    );
    assert!(
        table.contains("Sensitivity") && table.contains("Std. Dev"),
        "{table}"
    );
    let report = json(&d.join("report.json"));
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert_eq!(report["k"], 3);

    ok(
        d,
        &[
            "--config",
            "small.toml",
            "tune",
            "--cache",
            "feats.json",
            "--out",
            "gbt.json",
            "--model-kind",
            "gbt",
            "--log",
            "gbt.csv",
        ],
    );
    assert_eq!(json(&d.join("gbt.json"))["hyperparams"]["kind"], "gbt");
    assert!(std::fs::read_to_string(d.join("gbt.csv"))
        .unwrap()
        .starts_with("stage,n_estimators,max_depth,learning_rate,score"));
}

#[test]
fn train_and_predict_memorize_training_clips() {
    let dir = corpus();
    let d = dir.path();
    ok(
        d,
        &[
            "train",
            "--cache",
            "feats.json",
            "--hyperparams",
            "memorize.json",
            "--out",
            "model.json",
        ],
    );
    let model = json(&d.join("model.json"));
    assert_eq!(model["format"], "voxdx-model");
    assert_eq!(model["provenance"]["n_train"], 24);

    let labels = ok(
        d,
        &[
            "predict",
            "--model",
            "model.json",
            "--manifest",
            "corpus/manifest.csv",
        ],
    );
    let manifest = std::fs::read_to_string(d.join("corpus/manifest.csv")).unwrap();
    let truth: Vec<&str> = manifest
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    let got: Vec<&str> = labels.lines().collect();
    assert_eq!(got, truth);

    let one = ok(
        d,
        &[
            "predict",
            "--model",
            "model.json",
            "--wav",
            "corpus/neoplasm/neoplasm_002.wav",
        ],
    );
    assert_eq!(one.trim(), "neoplasm");
}

#[test]
fn tuned_d_carries_through_train_and_predict() {
    let dir = corpus();
    let d = dir.path();
    let grid = format!("{SMALL}\n[search]\nd_grid = [8, 12, 20]\n");
    std::fs::write(d.join("grid.toml"), grid).unwrap();

    // the grid needs d = 20 but the cache only has 15
    let out = voxdx(
        d,
        &[
            "--config",
            "grid.toml",
            "tune",
            "--cache",
            "feats.json",
            "--out",
            "hp.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--n-mfcc 20"), "{}", stderr(&out));

    ok(
        d,
        &[
            "extract",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "wide.json",
            "--n-mfcc",
            "20",
        ],
    );
    ok(
        d,
        &[
            "--config",
            "grid.toml",
            "tune",
            "--cache",
            "wide.json",
            "--out",
            "hp.json",
        ],
    );
    let chosen = json(&d.join("hp.json"))["d"].as_u64().unwrap();
    assert!([8, 12, 20].contains(&chosen));
    assert!(std::fs::read_to_string(d.join("hp.log"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .ends_with(",d,score,accepted_by_cascade,final_batch,candidate"));

    ok(
        d,
        &[
            "--config",
            "grid.toml",
            "evaluate",
            "--cache",
            "wide.json",
            "--hyperparams",
            "hp.json",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(json(&d.join("r.json"))["d"].as_u64(), Some(chosen));

    ok(
        d,
        &[
            "train",
            "--cache",
            "wide.json",
            "--hyperparams",
            "hp.json",
            "--out",
            "model.json",
        ],
    );
    let model = json(&d.join("model.json"));
    assert_eq!(model["d"].as_u64(), Some(chosen));
    assert_eq!(model["extract"]["mfcc"]["n_mfcc"].as_u64(), Some(chosen));
    let labels = ok(
        d,
        &[
            "predict",
            "--model",
            "model.json",
            "--manifest",
            "corpus/manifest.csv",
        ],
    );
    assert_eq!(labels.lines().count(), 24);
}

#[test]
fn errors_exit_with_category_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    std::fs::write(d.join("bad.toml"), "[shac]\nbogus = 1\n").unwrap();
    let out = voxdx(
        d,
        &[
            "--config", "bad.toml", "tune", "--cache", "x.json", "--out", "hp.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));

    std::fs::write(d.join("spec.toml"), "seed = 1\nvoices = 3\n").unwrap();
    let out = voxdx(d, &["synth", "--out", "c", "--spec", "spec.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("voices"));

    std::fs::write(
        d.join("model.json"),
        r#"{"format": "voxdx-model", "version": 7}"#,
    )
    .unwrap();
    let out = voxdx(d, &["predict", "--model", "model.json", "--wav", "a.wav"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("version 7"));

    std::fs::write(d.join("m.csv"), "# path,label\nmissing.wav,normal\n").unwrap();
    let out = voxdx(d, &["extract", "--manifest", "m.csv", "--out", "f.json"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("missing.wav"), "{}", stderr(&out));

    let out = voxdx(
        d,
        &[
            "evaluate",
            "--cache",
            "nope.json",
            "--hyperparams",
            "hp.json",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("nope.json"));
}
