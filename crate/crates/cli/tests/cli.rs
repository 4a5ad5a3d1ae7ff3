use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use perspecta_core::io::{parse_matrix, save_matrix};
use perspecta_core::HermitianMatrix;
use tempfile::TempDir;

fn perspecta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perspecta"))
        .args(args)
        .env_remove("PERSPECTA_SEED")
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, m: &HermitianMatrix) -> PathBuf {
    let p = dir.path().join(name);
    save_matrix(&p, m).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value_of(json: &str) -> HermitianMatrix {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    parse_matrix(&v["value"].to_string()).unwrap()
}

#[test]
fn eval_neg_log_scalar() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &HermitianMatrix::from_real_rows(&[&[2.0]]).unwrap());
    let b = write(&dir, "b.json", &HermitianMatrix::from_real_rows(&[&[1.0]]).unwrap());
    let out = perspecta(&["eval", "--f", "neg_log", "--order", "weight_first", "--a", s(&a), "--b", s(&b)]);
    assert_eq!(out.status.code(), Some(0));
    let v = value_of(&stdout(&out));
    assert!((v.get(0, 0).re - 1.3862943611).abs() < 1e-10);
}

#[test]
fn eval_identity_weight_second_returns_a() {
    let dir = TempDir::new().unwrap();
    let am = HermitianMatrix::from_real_rows(&[&[2.0, 0.5, 0.0], &[0.5, 1.0, 0.25], &[0.0, 0.25, 3.0]]).unwrap();
    let bm = HermitianMatrix::from_real_rows(&[&[1.0, 0.1, 0.0], &[0.1, 4.0, 0.0], &[0.0, 0.0, 0.5]]).unwrap();
    let (a, b) = (write(&dir, "a.json", &am), write(&dir, "b.json", &bm));
    let out_path = dir.path().join("out.json");
    let out = perspecta(&[
        "eval", "--f", "identity", "--order", "weight_second", "--a", s(&a), "--b", s(&b), "--out", s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = value_of(&std::fs::read_to_string(&out_path).unwrap());
    assert!(v.max_abs_diff(&am) < 1e-13);
}

#[test]
fn eval_with_indefinite_input_is_a_numeric_error() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &HermitianMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap());
    let b = write(&dir, "b.json", &HermitianMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap());
    let out = perspecta(&["eval", "--f", "inv", "--a", s(&a), "--b", s(&b)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("-1e0"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &HermitianMatrix::identity(2));
    assert_eq!(perspecta(&["eval", "--f", "cosh", "--a", s(&a), "--b", s(&a)]).status.code(), Some(2));
    let missing = perspecta(&["eval", "--f", "inv", "--a", s(&a), "--b", "/nonexistent.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dim": 2, "complex": false, "data": [1.0, 0.5, 0.0, 1.0]}"#).unwrap();
    let out = perspecta(&["eval", "--f", "inv", "--a", s(&a), "--b", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("not Hermitian"));
    assert_eq!(perspecta(&["verify", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(perspecta(&["verify", "--dims", "x"]).status.code(), Some(2));
    assert_eq!(perspecta(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(perspecta(&["frobnicate"]).status.code(), Some(2));
    let unknown = perspecta(&["verify", "--f", "cosh"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8(unknown.stderr).unwrap().contains("t_log_t"));
}

#[test]
fn catalog_lists_and_filters() {
    let out = perspecta(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).lines().count() >= 12);
    let json = perspecta(&["catalog", "--format", "json", "--classification", "operator_convex"]);
    let v: Vec<serde_json::Value> = serde_json::from_str(&stdout(&json)).unwrap();
    assert!(!v.is_empty());
    assert!(v.iter().all(|e| e["classification"] == "operator_convex"));
    let all: Vec<serde_json::Value> = serde_json::from_str(&stdout(&perspecta(&["catalog", "--format", "json"]))).unwrap();
    assert!(all.len() >= 11 && all.len() > v.len());
}

#[test]
fn verify_control_search_records_witness() {
    let out = perspecta(&["verify", "--suite", "detect_violation_control", "--f", "quart", "--dims", "2..4", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["passed"], true);
    let cells = report["reports"][0]["cells"].as_array().unwrap();
    let witness = cells.iter().find_map(|c| c.get("witness")).expect("witness");
    assert!(witness["margin"].as_f64().unwrap() < -1e-8);
    assert!(witness["matrices"]["a1"]["dim"].as_u64().is_some());
}

#[test]
fn verify_text_report_and_seed_env() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let out = Command::new(env!("CARGO_BIN_EXE_perspecta"))
        .args(["verify", "--suite", "homogeneity,finite_rank_formula", "--dims", "2,3", "--trials", "5", "--report"])
        .arg(&report)
        .env("PERSPECTA_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("PASS  homogeneity"), "{text}");
    assert!(text.contains("seed 7"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["config"]["check"]["seed"], 7);
    assert_eq!(json["config"]["check"]["dims"], serde_json::json!([2, 3]));
    assert_eq!(json["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn mean_and_entropy() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &HermitianMatrix::from_diagonal(&[4.0, 1.0]).unwrap());
    let b = write(&dir, "b.json", &HermitianMatrix::from_diagonal(&[1.0, 9.0]).unwrap());
    let out = perspecta(&["mean", "--a", s(&a), "--b", s(&b)]);
    assert_eq!(out.status.code(), Some(0));
    let g = parse_matrix(&stdout(&out)).unwrap();
    assert!((g.get(0, 0).re - 2.0).abs() < 1e-14 && (g.get(1, 1).re - 3.0).abs() < 1e-14);
    let out = perspecta(&["entropy", "--a", s(&a), "--b", s(&b), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let expected = 4.0 * 4f64.ln() + (1.0 / 9f64).ln();
    assert!((v["relative_entropy"].as_f64().unwrap() - expected).abs() < 1e-13);
    assert!(v["gap"].as_f64().unwrap().abs() < 1e-13);
}
