use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geomclass::cli::ResultFile;
use serde_json::Value;

fn geomclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomclass"))
        .args(args)
        .env("GEOMCLASS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = geomclass(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(geomclass(&["--help"]).status.code(), Some(0));
    assert_eq!(geomclass(&["--version"]).status.code(), Some(0));
    assert_eq!(geomclass(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        geomclass(&["synth", "--classes", "9"]).status.code(),
        Some(1)
    );

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nowhere");
    let r = geomclass(&["--out-dir", p(&out), "encode", "--data", p(&missing)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("manifest.json"));

    let data = tmp.path().join("data");
    ok(&[
        "--out-dir",
        p(&data),
        "synth",
        "--classes",
        "2",
        "--per-class",
        "10",
    ]);
    let r = geomclass(&[
        "--out-dir",
        p(&out),
        "train-shallow",
        "--data",
        p(&data),
        "--model",
        "knn",
    ]);
    assert_eq!(r.status.code(), Some(1), "missing --k is a usage error");
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let data = dir("data");
    ok(&[
        "--seed",
        "3",
        "--out-dir",
        p(&data),
        "synth",
        "--classes",
        "3",
        "--per-class",
        "20",
    ]);
    let manifest = read_json(&data.join("manifest.json"));
    assert_eq!(
        manifest["counts"]["train"].as_u64().unwrap()
            + manifest["counts"]["val"].as_u64().unwrap()
            + manifest["counts"]["test"].as_u64().unwrap(),
        60
    );

    let run = read_json(&data.join("run.json"));
    for key in [
        "argv",
        "command",
        "params",
        "out_dir",
        "seed",
        "threads",
        "version",
        "started",
        "effective",
        "outputs",
        "finished",
    ] {
        assert!(run.get(key).is_some(), "run.json lacks {key}");
    }
    assert_eq!(run["command"], "synth");
    assert!(!manifest["split_rule"]
        .as_str()
        .unwrap()
        .contains("stratified"));
    assert_eq!(run["seed"], 3);

    ok(&["--out-dir", p(&dir("enc")), "encode", "--data", p(&data)]);
    assert!(
        read_json(&dir("enc").join("manifest.json"))["scale_factor"]
            .as_f64()
            .unwrap()
            > 0.0
    );

    ok(&[
        "--out-dir",
        p(&dir("feat")),
        "features",
        "--data",
        p(&data),
        "--order",
        "3",
    ]);
    let header = fs::read_to_string(dir("feat").join("features_train.csv")).unwrap();
    assert!(header.lines().count() > 1);

    ok(&[
        "--out-dir",
        p(&dir("rec")),
        "reconstruct",
        "--wkt",
        "POLYGON ((0 0, 4 0, 4 1, 0 1, 0 0))",
        "--orders",
        "1,2,8",
    ]);
    let rec = fs::read_to_string(dir("rec").join("reconstruction.csv")).unwrap();
    assert_eq!(rec.lines().count(), 4);

    ok(&[
        "--out-dir",
        p(&dir("tree")),
        "train-shallow",
        "--data",
        p(&data),
        "--model",
        "dtree",
        "--max-depth",
        "4",
        "--order",
        "4",
    ]);
    let tree: ResultFile =
        serde_json::from_value(read_json(&dir("tree").join("result.json"))).unwrap();
    assert_eq!(tree.method, "Decision tree");

    ok(&[
        "--out-dir",
        p(&dir("grid")),
        "grid-search",
        "--data",
        p(&data),
        "--model",
        "knn",
        "--orders",
        "2,4",
        "--ks",
        "1,3",
        "--folds",
        "3",
    ]);
    assert!(dir("grid").join("cv_table.csv").is_file());

    ok(&[
        "--out-dir",
        p(&dir("cnn")),
        "train-deep",
        "--data",
        p(&dir("enc")),
        "--arch",
        "cnn",
        "--epochs",
        "3",
        "--batch-size",
        "8",
    ]);
    let runs = read_json(&dir("cnn").join("runs.json"));
    assert_eq!(runs.as_array().unwrap().len(), 1);

    let eval = dir("eval");
    ok(&[
        "--out-dir",
        p(&eval),
        "evaluate",
        "--data",
        p(&dir("enc")),
        "--model",
        p(&dir("cnn").join("model.json")),
        "--split",
        "test",
    ]);
    let trained: ResultFile =
        serde_json::from_value(read_json(&dir("cnn").join("result.json"))).unwrap();
    let again: ResultFile = serde_json::from_value(read_json(&eval.join("result.json"))).unwrap();
    assert_eq!(
        trained.score, again.score,
        "evaluating the saved model reproduces the training score"
    );
    assert!(eval.join("predictions_test.csv").is_file());

    ok(&[
        "--out-dir",
        p(&dir("tree-eval")),
        "evaluate",
        "--data",
        p(&data),
        "--model",
        p(&dir("tree").join("model.json")),
    ]);
    let te: ResultFile =
        serde_json::from_value(read_json(&dir("tree-eval").join("result.json"))).unwrap();
    assert_eq!(te.score, tree.score);

    let text = ok(&[
        "--out-dir",
        p(&dir("report")),
        "report",
        p(&dir("tree")),
        p(&dir("grid")),
        p(&dir("cnn")),
    ]);
    assert!(text.contains("Majority class") && text.contains("CNN"));
    assert!(dir("report").join("comparison.csv").is_file());
}

#[test]
fn run_manifest_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    ok(&[
        "--seed",
        "11",
        "--out-dir",
        p(&first),
        "synth",
        "--classes",
        "2",
        "--per-class",
        "15",
        "--jitter",
        "0.01",
    ]);
    let run = read_json(&first.join("run.json"));
    let second = tmp.path().join("second");
    let argv: Vec<String> = run["argv"]
        .as_array()
        .unwrap()
        .iter()
        .skip(1)
        .map(|a| a.as_str().unwrap().to_string())
        .map(|a| {
            if a == p(&first) {
                p(&second).to_string()
            } else {
                a
            }
        })
        .collect();
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    ok(&argv);
    for f in ["manifest.json", "train.ndjson", "val.ndjson", "test.ndjson"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
    let replay = read_json(&second.join("run.json"));
    assert_eq!(replay["params"]["command"], run["params"]["command"]);
    assert_eq!(replay["effective"], run["effective"]);
}

#[test]
fn stratified_synth_balances_the_holdouts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "--out-dir",
        p(&data),
        "synth",
        "--per-class",
        "20",
        "--stratify",
    ]);
    let manifest = read_json(&data.join("manifest.json"));
    assert!(manifest["split_rule"]
        .as_str()
        .unwrap()
        .starts_with("stratified"));
    for split in ["val", "test"] {
        let text = fs::read_to_string(data.join(format!("{split}.ndjson"))).unwrap();
        let mut counts = [0; 5];
        for line in text.lines() {
            counts[read_label(line)] += 1;
        }
        assert_eq!(counts, [2; 5], "{split}");
    }
}

fn read_label(line: &str) -> usize {
    serde_json::from_str::<Value>(line).unwrap()["label"]
        .as_u64()
        .unwrap() as usize
}
