use std::path::PathBuf;
use std::process::{Command, Output};

use ncmart_cli::{random_instance, CSV_COLUMNS};
use serde_json::Value;

fn ncmart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncmart")).args(args).output().unwrap()
}

fn temp_file(tag: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("ncmart-cli-{tag}-{}.json", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn norms_reports_every_family() {
    let x = random_instance(1, 0, 3);
    let path = temp_file("norms", &serde_json::to_string(&x.to_json()).unwrap());
    let out = ncmart(&["norms", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = report["rows"].as_array().unwrap();
    // Six p-indexed families at three exponents plus ten p-free ones.
    assert_eq!(rows.len(), 6 * 3 + 10);
    let lp2 = rows
        .iter()
        .find(|r| r["name"] == "lp" && r["p"] == 2.0)
        .unwrap();
    let oracle = ncmart::norms::lp_norm(&x, ncmart::Exponent::Finite(2.0)).unwrap();
    assert!((lp2["value"].as_f64().unwrap() - oracle).abs() < 1e-14);

    let out = ncmart(&["norms", path.to_str().unwrap(), "--families", "bmo_c,lp", "--p", "1,inf", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 3);
    let _ = std::fs::remove_file(path);
}

#[test]
fn malformed_json_is_an_input_error_with_position() {
    let path = temp_file("bad", "{\"space\": {\"weights\": [0.5, 0.5],\n  \"mats\": [1, }");
    let out = ncmart(&["norms", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(out.stdout.is_empty());
    let _ = std::fs::remove_file(path);

    let out = ncmart(&["norms", "/nonexistent/operator.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_exponents_are_rejected() {
    let out = ncmart(&["jn-verify", "--random", "--trials", "1", "--p", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ncmart(&["jn-verify", "--random", "--trials", "1", "--p", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ncmart(&["atoms-verify", "--trials", "1", "--q", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ncmart(&["atoms-verify", "--trials", "1", "--q", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ncmart(&["sweep-growth", "--unknown-flag"]);
    assert_eq!(out.status.code(), Some(2));
    // Neither --instance nor --random.
    let out = ncmart(&["jn-verify"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_file_matches_stdout() {
    let path = std::env::temp_dir().join(format!("ncmart-cli-out-{}.json", std::process::id()));
    let args = ["counterexample", "remark320", "--n", "2,3"];
    let direct = ncmart(&args);
    let mut with_out: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    with_out.extend(["--out", &p]);
    let out = ncmart(&with_out);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
    let _ = std::fs::remove_file(path);
}

#[test]
fn rows_are_sorted_and_seed_is_echoed() {
    let out = ncmart(&["jn-verify", "--instance", "rademacher", "--n", "3", "--budget", "8", "--seed", "17"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 17);
    assert_eq!(report["passed"], true);
    let keys: Vec<(String, String)> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["section"].as_str().unwrap().into(), r["name"].as_str().unwrap().into()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn tolerance_override_can_fail_a_check() {
    // A zero tolerance turns any rounding-level deviation into a failed
    // check (exit code 1).
    let out = ncmart(&["counterexample", "remark320", "--tol", "0"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let any_nonzero = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .any(|r| r["deviation"].as_f64().unwrap_or(0.0) > 0.0);
    assert_eq!(out.status.code(), Some(if any_nonzero { 1 } else { 0 }));
}
