//! End-to-end runs of the `dphase` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::Value;

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dphase"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config(nodes: usize, p: f64, q: f64, weight: &str, extra: &str) -> String {
    format!(
        r#"{{
  "grid": {{"extents": [[0.0, 1.0]], "nodes_per_axis": [{nodes}]}},
  "exponents": {{"p": {p}, "q": {q}}},
  "weight": {weight},
  "solver": {{"multistarts": 2, "seed": 3}}{extra}
}}"#
    )
}

const X1: &str = r#"{"kind": "x1"}"#;

#[test]
fn eig_matches_linear_oracle() {
    let n = 65;
    let m = n - 2;
    let h = 1.0 / (n - 1) as f64;
    let k = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => 2.0 / h,
        1 => -1.0 / h,
        _ => 0.0,
    });
    let mass = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => h / 2.0,
        1 => h / 4.0,
        _ => 0.0,
    });
    let linv = mass.cholesky().unwrap().l().try_inverse().unwrap();
    let mu = SymmetricEigen::new(&linv * k * linv.transpose()).eigenvalues.min();

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(n, 2.0, 2.0, r#"{"kind": "constant", "value": 1.0}"#, ""));
    let o = run(&["eig"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("eig_report.json"));
    let lh = rep["lambda_hat1"].as_f64().unwrap();
    assert!((lh - mu).abs() <= 1e-8 * mu, "{lh} vs {mu}");
    let lines = std::fs::read_to_string(dir.path().join("eigenfunction.txt")).unwrap();
    assert_eq!(lines.lines().count(), n);
}

#[test]
fn inverted_exponents_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(33, 1.5, 2.0, X1, ""));
    for cmd in ["eig", "props"] {
        let o = run(&[cmd], &cfg, dir.path());
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("q < p"), "{}", stderr(&o));
    }
}

#[test]
fn strict_mode_warns_on_violated_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let json = config(33, 3.0, 2.0, X1, "").replace(r#""q": 2}"#, r#""q": 2, "strict": true}"#);
    let cfg = write_config(dir.path(), "c.json", &json);
    let o = run(&["eig"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: hypothesis p < N violated"), "{}", stderr(&o));
}

#[test]
fn solve_above_and_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let above = write_config(dir.path(), "a.json", &config(129, 3.0, 2.0, X1, r#", "lambda": {"factor": 1.5}"#));
    let o = run(&["solve"], &above, &dir.path().join("above"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("above/solve_report.json"));
    assert_eq!(rep["feasible"], Value::Bool(true));
    assert!(rep["m_lambda"].as_f64().unwrap() > 0.0);
    assert!(rep["min_u"].as_f64().unwrap() >= 0.0);
    assert!(dir.path().join("above/solution.txt").exists());

    let below = write_config(dir.path(), "b.json", &config(129, 3.0, 2.0, X1, r#", "lambda": {"factor": 0.5}"#));
    let o = run(&["solve"], &below, &dir.path().join("below"));
    assert_eq!(o.status.code(), Some(3));
    let rep = read_json(&dir.path().join("below/solve_report.json"));
    assert_eq!(rep["feasible"], Value::Bool(false));
    assert!(rep["m_lambda"].is_null());
}

#[test]
fn missing_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(33, 3.0, 2.0, r#"{"kind": "file", "path": "nowhere.txt"}"#, ""));
    assert_eq!(run(&["eig"], &cfg, dir.path()).status.code(), Some(1));
    let cfg = write_config(dir.path(), "d.json", &config(33, 3.0, 2.0, X1, ""));
    assert_eq!(run(&["solve"], &cfg, dir.path()).status.code(), Some(1));
    assert_eq!(run(&["sweep"], &cfg, dir.path()).status.code(), Some(1));
    assert_eq!(run(&["eig"], &dir.path().join("absent.json"), dir.path()).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_dphase")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sweep_splits_at_threshold_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = r#", "sweep": {"from": 0.5, "to": 2.0, "steps": 16}"#;
    let cfg = write_config(dir.path(), "c.json", &config(65, 3.0, 2.0, X1, sweep));
    let o = run(&["sweep"], &cfg, &dir.path().join("one"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["sweep"], &cfg, &dir.path().join("two"));
    assert_eq!(o.status.code(), Some(0));
    let first = std::fs::read(dir.path().join("one/sweep.csv")).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("two/sweep.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().next(), Some(dphase::cli::SWEEP_HEADER));
    let rows = csv_rows(&dir.path().join("one/sweep.csv"));
    assert_eq!(rows.len(), 16);
    let eig = run(&["eig"], &cfg, &dir.path().join("eig"));
    assert_eq!(eig.status.code(), Some(0));
    let lh = read_json(&dir.path().join("eig/eig_report.json"))["lambda_hat1"].as_f64().unwrap();
    for r in &rows {
        let lambda: f64 = r[0].parse().unwrap();
        if lambda <= lh {
            assert_eq!(r[1], "false");
            assert!(r[2].is_empty());
            assert_eq!(r[6], "0");
        } else {
            assert_eq!(r[1], "true");
            assert!(r[2].parse::<f64>().unwrap() > 0.0);
            assert!(r[6].parse::<i64>().unwrap() > 0);
        }
    }
    let lambdas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn single_step_sweep_agrees_with_solve() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#", "lambda": {"factor": 1.3}, "sweep": {"from": 1.3, "to": 1.3, "steps": 1}"#;
    let cfg = write_config(dir.path(), "c.json", &config(65, 3.0, 2.0, X1, extra));
    assert_eq!(run(&["sweep"], &cfg, dir.path()).status.code(), Some(0));
    assert_eq!(run(&["solve"], &cfg, dir.path()).status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    let rep = read_json(&dir.path().join("solve_report.json"));
    assert_eq!(rows.len(), 1);
    for (col, key) in [(0, "lambda"), (2, "m_lambda"), (3, "residual"), (4, "min_u"), (5, "max_u")] {
        let a: f64 = rows[0][col].parse().unwrap();
        let b = rep[key].as_f64().unwrap();
        assert_eq!(format!("{a:.16e}"), format!("{b:.16e}"), "{key}");
    }
}

#[test]
fn props_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(33, 3.0, 2.0, X1, r#", "props": {"trials": 10}"#));
    let o = run(&["props"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("props_report.json"));
    assert_eq!(rep["all_passed"], Value::Bool(true));
    assert!(rep["properties"].as_array().unwrap().len() >= 8);

    let cfg = write_config(dir.path(), "z.json", &config(33, 3.0, 2.0, X1, r#", "props": {"trials": 0}"#));
    let o = run(&["props"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trials"));
}

#[test]
fn eigenfunction_round_trips_as_weight_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &config(33, 3.0, 2.0, X1, ""));
    assert_eq!(run(&["eig"], &cfg, dir.path()).status.code(), Some(0));
    let weight = r#"{"kind": "file", "path": "eigenfunction.txt"}"#;
    let cfg = write_config(dir.path(), "w.json", &config(33, 3.0, 2.0, weight, ""));
    let o = run(&["eig"], &cfg, &dir.path().join("w"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read_json(&dir.path().join("w/eig_report.json"))["lambda_hat1"].as_f64().unwrap() > 0.0);
}
