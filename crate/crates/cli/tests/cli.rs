use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_otto-qutrit"));
    c.env_remove("OTTO_QUTRIT_THREADS");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    &row[header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))]
}

#[test]
fn regression_cycle_is_reproduced_exactly() {
    let out = run(bin().args(["cycle", "run", "--format", "csv", "--config"]).arg(config("regression.toml")));
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    let get = |name: &str| column(&header, &rows[0], name).parse::<f64>().unwrap();
    assert_eq!(get("w_ext"), 3.358709020250798e-5);
    assert_eq!(get("w1"), 1.2087613695320701e-1);
    assert_eq!(get("q2"), 1.5356933822809662e-4);
    assert_eq!(get("w3"), -1.2090972404340952e-1);
    assert_eq!(get("q4"), -1.1998224802558849e-4);
    assert_eq!(get("p1"), 2.8826521158517543e-1);
    assert_eq!(get("p2"), 1.264461892723439e-1);
    assert_eq!(column(&header, &rows[0], "sign_triple"), "+++");
    assert_eq!(column(&header, &rows[0], "quadrant"), "2");
    assert_eq!(column(&header, &rows[0], "pwc_satisfied"), "true");

    let out = run(bin().args(["cycle", "run", "--config"]).arg(config("regression.toml")));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["ledger"]["w_ext"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_is_identical_across_thread_counts() {
    let sweep = |threads: &str| {
        let out = run(bin().env("OTTO_QUTRIT_THREADS", threads).args(["cycle", "sweep", "--config"]).arg(config("temperature_sweep.toml")));
        assert!(out.status.success());
        out.stdout
    };
    let one = sweep("1");
    assert_eq!(one, sweep("4"));
    let (_, rows) = csv_rows(std::str::from_utf8(&one).unwrap());
    assert_eq!(rows.len(), 48);
}

#[test]
fn sweep_keeps_rows_of_invalid_points() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("regression.toml")).unwrap()
        + "\n[[sweep.axis]]\nparam = \"lambda\"\nvalues = [0.01, -1.0, 0.02]\n";
    let path = dir.path().join("sweep.toml");
    std::fs::write(&path, text).unwrap();
    let out = run(bin().args(["cycle", "sweep", "--config"]).arg(&path));
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 3);
    assert!(column(&header, &rows[0], "error").is_empty());
    assert!(column(&header, &rows[1], "error").contains("lambda"));
    assert!(column(&header, &rows[1], "w_ext").is_empty());
    let w0: f64 = column(&header, &rows[0], "w_ext").parse().unwrap();
    let w2: f64 = column(&header, &rows[2], "w_ext").parse().unwrap();
    assert!((w2 / w0 - 4.0).abs() < 1e-9);
}

#[test]
fn region_of_all_positive_triple_splits_on_the_diagonal() {
    let out = run(bin().args(["pwc", "region", "--case", "+++", "--theta", "1", "--grid", "21"]));
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 21 * 21);
    for row in &rows {
        let s21: f64 = column(&header, row, "s21").parse().unwrap();
        let s01: f64 = column(&header, row, "s01").parse().unwrap();
        if (s01 - s21).abs() > 1e-9 {
            assert_eq!(column(&header, row, "satisfied") == "true", s01 > s21, "({s21}, {s01})");
        }
    }
}

#[test]
fn oracle_compare_passes_and_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.json");
    let out = run(bin().args(["oracle", "compare", "--draws", "3", "--seed", "7", "--grid", "128", "--format", "json", "--out"]).arg(&path));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["passed"] == true));
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "lambda = -1.0\n[gaps.stage_i]\nomega01 = 1.0\nomega12 = 1.2\n[gaps.stage_ii]\nomega01 = 0.8\nomega12 = 0.9\n\
         [correlator_i]\nkind = \"inertial_thermal\"\ntemperature = -2.0\n[correlator_ii]\nkind = \"inertial_thermal\"\ntemperature = 0.5\n\
         [switching_i]\nsigma = 10.0\n[switching_ii]\nsigma = 10.0\ncenter = 5.0\n",
    )
    .unwrap();
    let out = run(bin().args(["cycle", "run", "--config"]).arg(&path));
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    let fields: Vec<&str> = err["violations"].as_array().unwrap().iter().map(|v| v["field"].as_str().unwrap()).collect();
    for expected in ["lambda", "correlator_i.temperature", "switching_ii.center"] {
        assert!(fields.contains(&expected), "{fields:?}");
    }
}

#[test]
fn usage_errors_exit_nonzero_with_json() {
    let out = run(bin().args(["oracle", "compare", "--grid", "63"]));
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err.is_object());

    let out = run(bin().env("OTTO_QUTRIT_THREADS", "zero").args(["pwc", "region", "--case", "+++", "--theta", "1"]));
    assert_eq!(out.status.code(), Some(1));

    let out = run(bin().args(["pwc", "region", "--case", "++x", "--theta", "1"]));
    assert!(!out.status.success());
}

#[test]
fn response_compute_csv_has_both_stages() {
    let out = run(bin().args(["response", "compute", "--format", "csv", "--config"]).arg(config("regression.toml")));
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert_eq!(column(&header, &rows[0], "stage"), "I");
    let hot: f64 = column(&header, &rows[0], "f_plus_01").parse().unwrap();
    let cold: f64 = column(&header, &rows[1], "f_plus_01").parse().unwrap();
    assert!(hot > cold);
}
