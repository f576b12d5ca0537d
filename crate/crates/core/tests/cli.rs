use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractal-drift"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_errors(path: &Path) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect()
}

#[test]
fn check_without_drift_passes_with_maximal_margins() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["check", "--levels", "1-3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["smallness"]["drift_energy"], 0.0);
    assert_eq!(report["s"], 0.5);
    for key in ["delta", "s", "t", "lambda", "diam_proxy"] {
        assert!(report[key].is_number(), "{key}");
    }
    assert_eq!(report["passed"], true);
}

#[test]
fn check_with_default_drift_reports_constants() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["check", "--levels", "2", "--drift", "default", "--assumption", "B"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("check.json"));
    assert!((report["smallness"]["drift_energy"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!((report["s"].as_f64().unwrap() - 0.775).abs() < 1e-9);
    assert_eq!(report["sd"]["sd4_passed"], true);
    assert_eq!(report["sandwich"]["passed"], true);
    assert_eq!(report["rates"]["valid"], true);
}

#[test]
fn oversized_drift_fails_condition_one() {
    let dir = TempDir::new().unwrap();
    let drift = dir.path().join("big.toml");
    fs::write(&drift, "[[terms]]\nb = { constant = 2.0 }\nh = { level = 0, values = [1.0, 0.0, 0.0] }\n").unwrap();
    let out = run(dir.path(), &["check", "--levels", "1-2", "--drift", drift.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Condition I violated"), "{stderr}");
    assert!(stderr.contains("margin"));
    // the other commands refuse to run
    let out = run(dir.path(), &["simulate", "--levels", "1", "--drift", drift.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["check", "--levels", "0-2"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["check", "--bogus"]).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "symbol_count = 3\n").unwrap();
    assert_eq!(run(dir.path(), &["check", "--structure", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["check", "--drift", "missing.toml"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["resolvent", "--levels", "1", "--alpha", "0.1"]).status.code(), Some(2));
}

#[test]
fn simulate_with_no_paths_writes_empty_trajectories() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate", "--levels", "2", "--paths", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("trajectories.jsonl")).unwrap(), "");
    assert_eq!(fs::read_to_string(dir.path().join("summary.csv")).unwrap(), "time,vertex,probability\n");
}

#[test]
fn simulate_level_one_holding_time() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate", "--levels", "1", "--paths", "100000", "--t", "0.2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("simulate.json"));
    let holding = &report["holding_time"];
    assert!((holding["rate"].as_f64().unwrap() - 30.0).abs() < 1e-12);
    let mean = holding["mean"].as_f64().unwrap();
    let se = holding["standard_error"].as_f64().unwrap();
    assert!((mean - 1.0 / 30.0).abs() <= 3.0 * se, "{mean} +- {se}");
    let first = fs::read_to_string(dir.path().join("trajectories.jsonl")).unwrap();
    let line: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(line["seed"], 3);
    assert_eq!(line["states"][0], 1);
}

#[test]
fn paired_difference_with_drift() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate", "--levels", "2", "--drift", "default", "--paths", "2000", "--t", "0.01,0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("paired.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    // common random numbers: identical paths until the rates differ
    let report = json(&dir.path().join("simulate.json"));
    assert_eq!(report["paired_difference"].as_array().unwrap().len(), 2);
}

#[test]
fn converge_writes_four_reports_and_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["converge", "--levels", "1-3", "--reference-level", "4", "--drift", "default", "--paths", "500", "--seed", "8"];
    for dir in [&a, &b] {
        let out = run(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["ks_norm.csv", "resolvent.csv", "semigroup.csv", "path_law.csv", "path_law_mc.csv", "converge.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    let errors = csv_errors(&a.path().join("resolvent.csv"));
    assert_eq!(errors.len(), 3);
    assert!(errors[2] < errors[0]);
    let report = json(&a.path().join("converge.json"));
    assert!(report["path_law"]["summary"]["banner"].as_str().unwrap().contains("J1"));
}

#[test]
fn semigroup_report_vanishes_at_time_zero() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["converge", "--levels", "1-2", "--t", "0", "--paths", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(csv_errors(&dir.path().join("semigroup.csv")).iter().all(|&e| e == 0.0));
}

#[test]
fn resolvent_and_semigroup_emit_vertex_functions() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["resolvent", "--levels", "2", "--drift", "default", "--alpha", "5,9"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["semigroup", "--levels", "2", "--t", "0,0.5"]).status.code(), Some(0));
    for name in ["resolvent_0.txt", "resolvent_1.txt", "semigroup_0.txt", "semigroup_1.txt"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 15, "{name}");
    }
    // T_0 f = f, the x coordinate
    let t0 = fractal_drift::textio::read_dense_function(
        fs::read_to_string(dir.path().join("semigroup_0.txt")).unwrap().as_bytes(),
        15,
    )
    .unwrap();
    assert_eq!(t0[2], 1.0);
    let report = json(&dir.path().join("semigroup.json"));
    assert_eq!(report["applications"][1]["markov_check"]["passed"], true);
}

#[test]
fn config_file_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "levels = [1, 2]\nseed = 5\n[tolerances]\nsd_draws = 20\n").unwrap();
    let out = run(dir.path(), &["check", "--levels", "1-4", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["working_level"], 2);
    assert_eq!(report["seed"], 5);
    assert_eq!(report["sd"]["draws"], 20);
}

#[test]
fn configured_structure_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    let structure = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/interval.toml");
    let s = structure.to_str().unwrap();
    let out = run(dir.path(), &["check", "--structure", s, "--levels", "1-3", "--drift", "default"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["density"], "assumed");
    assert!((report["diam_proxy"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let out = run(dir.path(), &["converge", "--structure", s, "--levels", "1-3", "--paths", "100"]);
    assert_eq!(out.status.code(), Some(0));
}
