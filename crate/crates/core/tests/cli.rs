use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn chart_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("charts").join(format!("{name}.json"))
}

fn metacurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metacurv")).args(args).output().expect("binary runs")
}

fn run(sub: &str, chart: &str, extra: &[&str]) -> (i32, Value) {
    let path = chart_path(chart);
    let mut args = vec![sub, "--chart", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = metacurv(&args);
    let code = out.status.code().expect("exit code");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, report)
}

#[test]
fn exit_code_matrix() {
    let cases: &[(&str, &str, i32)] = &[
        ("validate", "symp2_const", 0),
        ("connection", "symp2_const", 0),
        ("hawkins", "symp2_const", 0),
        ("metacurvature", "symp2_const", 0),
        ("tensor-t", "symp2_const", 0),
        ("reconstruct", "symp2_const", 0),
        ("hawkins", "symp2_quad", 0),
        ("tensor-t", "symp2_quad", 0),
        ("reconstruct", "symp2_quad", 3),
        ("hawkins", "symp2_cubic", 2),
        ("metacurvature", "symp2_cubic", 0),
        ("reconstruct", "symp2_cubic", 3),
        ("validate", "reg3_riemannian", 0),
        ("hawkins", "reg3_riemannian", 2),
        ("metacurvature", "reg3_riemannian", 3),
        ("reconstruct", "aff1_liepoisson", 0),
        ("validate", "aff1_group", 0),
        ("validate", "broken_antisymmetry", 2),
        ("connection", "broken_antisymmetry", 3),
        ("validate", "broken_jacobi", 2),
        ("connection", "broken_jacobi", 3),
    ];
    for &(sub, chart, want) in cases {
        let (code, report) = run(sub, chart, &[]);
        assert_eq!(code, want, "{sub} on {chart}: {report}");
        assert_eq!(report["command"], sub);
        assert_eq!(report["passed"], want == 0, "{sub} on {chart}");
    }
}

#[test]
fn reports_are_deterministic() {
    for (sub, chart) in [("hawkins", "reg3_riemannian"), ("reconstruct", "aff1_liepoisson")] {
        let path = chart_path(chart);
        let args = [sub, "--chart", path.to_str().unwrap(), "--seed", "7"];
        let a = metacurv(&args);
        let b = metacurv(&args);
        assert_eq!(a.stdout, b.stdout, "{sub} on {chart}");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn cubic_metacurvature_report() {
    let (code, report) = run("metacurvature", "symp2_cubic", &[]);
    assert_eq!(code, 0);
    assert_eq!(report["zero"], false);
    assert_eq!(report["definition_agrees"], true);
    let text = report["components"].to_string();
    assert!(text.contains("-6"), "{text}");
}

#[test]
fn quad_rejection_names_t() {
    let (code, report) = run("reconstruct", "symp2_quad", &[]);
    assert_eq!(code, 3);
    let msg = report["error"].as_str().unwrap();
    assert!(msg.contains("T(φ1, φ1)"), "{msg}");
}

#[test]
fn text_output() {
    let path = chart_path("symp2_const");
    let out = metacurv(&["validate", "--chart", path.to_str().unwrap(), "--output", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("validate"), "{s}");
    assert!(serde_json::from_str::<Value>(&s).is_err());
}

#[test]
fn bundled_name_resolves() {
    let out = metacurv(&["validate", "--chart", "symp2_const"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_keys_and_missing_files_are_rejected() {
    let mut raw: Value = serde_json::from_str(&std::fs::read_to_string(chart_path("symp2_const")).unwrap()).unwrap();
    raw["colour"] = Value::from("blue");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, raw.to_string()).unwrap();
    let out = metacurv(&["validate", "--chart", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = metacurv(&["validate", "--chart", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tolerance_flag_is_echoed() {
    let (code, report) = run("reconstruct", "aff1_liepoisson", &["--tol", "1e-7", "--grid", "17"]);
    assert_eq!(code, 0, "{report}");
    assert_eq!(report["tol"], 1e-7);
}
