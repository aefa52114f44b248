use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use autoneb_core::io::{read_profile_csv, write_json, ParamsFile};
use autoneb_core::ParamVector;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_owned()
}

fn autoneb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoneb")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = autoneb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_point(path: &Path, values: Vec<f64>) {
    write_json(path, &ParamsFile::new(&ParamVector::new(values).unwrap(), None, None)).unwrap();
}

#[test]
fn train_writes_minima_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--config", &config("double_well.json"), "--count", "1", "--out", s(dir.path())]);
    let m = json(&dir.path().join("minima/manifest.json"));
    assert_eq!(m["minima"].as_array().unwrap().len(), 1);
    assert!(m["minima"][0]["loss"].as_f64().unwrap() < 1e-6);
    let min = json(&dir.path().join("minima/minimum_000.json"));
    assert_eq!(min["meta"]["seed"], 1);
    assert_eq!(min["meta"]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(min["values_hex"].as_array().unwrap().len(), 2);
}

#[test]
fn train_zero_count_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--config", &config("double_well.json"), "--count", "0", "--out", s(dir.path())]);
    let m = json(&dir.path().join("minima/manifest.json"));
    assert!(m["minima"].as_array().unwrap().is_empty());
}

#[test]
fn train_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&["train", "--config", &config("xor_2_3_1.json"), "--count", "2", "--seed", "5", "--out", s(&out)]);
    }
    for f in ["minimum_000.json", "minimum_001.json", "permuted/minimum_000.json", "manifest.json"] {
        let a = fs::read(dir.path().join("a/minima").join(f)).unwrap();
        let b = fs::read(dir.path().join("b/minima").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let m = json(&dir.path().join("a/minima/manifest.json"));
    assert_eq!(m["meta"]["seed"], 5);
}

#[test]
fn training_divergence_exits_with_numerical_code_and_keeps_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("double_well.json")).unwrap();
    let text = text.replace("\"learning_rate\": 0.05, \"momentum\": 0.9, \"weight_decay\": 0.0, \"steps\": 500", "\"learning_rate\": 50.0, \"momentum\": 0.9, \"weight_decay\": 0.0, \"steps\": 500");
    let cfg = dir.path().join("diverge.json");
    fs::write(&cfg, text).unwrap();
    let out = autoneb(&["train", "--config", s(&cfg), "--count", "2", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&dir.path().join("minima/manifest.json"));
    assert_eq!(m["requested"], 2);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(autoneb(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(autoneb(&["train"]).status.code(), Some(1));
    assert_eq!(autoneb(&["train", "--config", "/nonexistent.json"]).status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"landscape": {"type": "double_well"}, "train": {"learning_rate": -1, "steps": 5}}"#).unwrap();
    assert_eq!(autoneb(&["train", "--config", s(&bad)]).status.code(), Some(1));
    fs::write(&bad, r#"{"landscape": {"type": "nope"}, "train": {"learning_rate": 1, "steps": 5}}"#).unwrap();
    assert_eq!(autoneb(&["train", "--config", s(&bad)]).status.code(), Some(1));
    assert_eq!(autoneb(&["--help"]).status.code(), Some(0));
}

#[test]
fn connect_double_well_minima() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    write_point(&a, vec![-1.0, 1.0]);
    write_point(&b, vec![1.0, 1.0]);
    ok(&["connect", s(&a), s(&b), "--config", &config("double_well.json"), "--out", s(dir.path())]);
    let r = json(&dir.path().join("report.json"));
    assert!((r["saddle_loss"].as_f64().unwrap() - 1.0).abs() < 0.02);
    assert!(r["path_length_ratio"].as_f64().unwrap() > 1.0);
    let saddle = json(&dir.path().join("saddle.json"));
    assert!(saddle["source"] == "pivot" || saddle["source"] == "dense_point");
    assert_eq!(saddle["params"]["dim"], 2);
    let chain = json(&dir.path().join("chain.json"));
    assert_eq!(chain["dim"], 2);
    assert_eq!(chain["pivots"][0], serde_json::json!([-1.0, 1.0]));
    let text = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(text.lines().nth(1).unwrap() == "cumulative_arc_length,alpha_global,loss,is_pivot");
}

#[test]
fn connect_identical_minima_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    write_point(&a, vec![1.0, 1.0]);
    ok(&["connect", s(&a), s(&a), "--config", &config("double_well.json"), "--out", s(dir.path())]);
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["saddle_loss"], r["min_loss_a"]);
    assert_eq!(r["path_length_ratio"], 1.0);
}

#[test]
fn connect_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    write_point(&a, vec![1.0, 1.0]);
    write_point(&b, vec![1.0, 1.0, 1.0]);
    let out = autoneb(&["connect", s(&a), s(&b), "--config", &config("double_well.json"), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_path_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    write_point(&a, vec![-1.0, 1.0]);
    write_point(&b, vec![1.0, 1.0]);
    let cfg = config("double_well.json");
    ok(&["connect", s(&a), s(&b), "--config", &cfg, "--out", s(dir.path())]);
    let chain = dir.path().join("chain.json");
    ok(&["eval-path", s(&chain), "--dense", "9", "--config", &cfg, "--out", s(dir.path())]);
    let straight = read_profile_csv(fs::File::open(dir.path().join("straight_profile.csv")).unwrap()).unwrap();
    assert_eq!(straight.len(), 11);
    assert!((straight[5].loss - 3.0).abs() < 1e-12);
    assert!((straight[5].alpha_global - 0.5).abs() < 1e-12);
    let along = read_profile_csv(fs::File::open(dir.path().join("chain_profile.csv")).unwrap()).unwrap();
    let max = along.iter().map(|r| r.loss).fold(f64::MIN, f64::max);
    assert!((max - 1.0).abs() < 0.02, "{max}");
    assert!(along.first().unwrap().is_pivot && along.last().unwrap().is_pivot);

    let out = autoneb(&["eval-path", s(&chain), "--dense", "0", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = autoneb(&["eval-path", s(&chain), "--config", &config("xor_2_2_1.json"), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn explore_two_minima_gives_one_edge() {
    let dir = tempfile::tempdir().unwrap();
    let minima = dir.path().join("minima");
    fs::create_dir(&minima).unwrap();
    write_point(&minima.join("a.json"), vec![-1.0, 1.0]);
    write_point(&minima.join("b.json"), vec![1.0, 1.0]);
    let out = ok(&["explore", s(&minima), "--config", &config("double_well.json"), "--out", s(dir.path())]);
    let g = json(&dir.path().join("graph.json"));
    assert_eq!(g["edges"].as_array().unwrap().len(), 1);
    assert_eq!(g["mst"], serde_json::json!([0]));
    assert_eq!(g["nodes"][0]["params_file"], "nodes/node_000.json");
    let chain_file = g["edges"][0]["chain_file"].as_str().unwrap();
    assert!(dir.path().join(chain_file).exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("saddle_loss"));
}

#[test]
fn explore_budget_stops_after_star() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("five_wells.json");
    ok(&["train", "--config", &cfg, "--count", "4", "--out", s(dir.path())]);
    let text = fs::read_to_string(configs().join("five_wells.json")).unwrap().replace("\"budget\": 7", "\"budget\": 3");
    let small = dir.path().join("budget3.json");
    fs::write(&small, text).unwrap();
    ok(&["explore", s(&dir.path().join("minima")), "--config", s(&small), "--out", s(dir.path())]);
    let g = json(&dir.path().join("graph.json"));
    let edges = g["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 3);
    assert!(edges.iter().all(|e| e["u"] == 0));
    assert_eq!(json(&dir.path().join("explore.json"))["stop"], "budget_exhausted");
}

#[test]
fn explore_on_three_wells_lowers_or_keeps_the_tree_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("three_wells.json");
    ok(&["train", "--config", &cfg, "--count", "5", "--out", s(dir.path())]);
    ok(&["explore", s(&dir.path().join("minima")), "--config", &cfg, "--out", s(dir.path())]);
    let summary = json(&dir.path().join("explore.json"));
    let history: Vec<f64> = summary["mst_max_history"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(history.last().unwrap() <= &history[0]);
}
