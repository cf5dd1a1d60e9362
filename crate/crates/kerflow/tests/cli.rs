use std::path::Path;
use std::process::{Command, Output};

use kerflow::catalog::example;

fn kerflow(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kerflow"));
    cmd.args(args).env_remove("KERFLOW_SEED");
    if let Some(p) = config {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_key_exits_two_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "typo.json",
        r#"{"experiment": "flow_laws", "fields": [{"builtin": "rotation"}], "tolerances": {"flwo": 1e-8}}"#,
    );
    let out = kerflow(&["run"], Some(&path));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.tolerances.flwo"));
}

#[test]
fn unknown_builtin_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.json",
        r#"{"experiment": "flow_laws", "fields": [{"builtin": "spiral"}]}"#,
    );
    let out = kerflow(&["validate"], Some(&path));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.fields[0].builtin"));
}

#[test]
fn mismatched_parity_fails_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "mismatch.json",
        r#"{
            "experiment": "compatibility",
            "kernel": {"name": "gaussian_rbf", "params": {"dim": 2}},
            "algebra": {"name": "euclidean_motion", "params": [2, 1, 1]},
            "action": {"kind": "affine"},
            "sample": {"bounds": [[-1, 1], [-1, 1]], "points": 8}
        }"#,
    );
    let out = kerflow(&["run", "--stable-output"], Some(&path));
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "fail");
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.iter().any(|n| n.starts_with("compatibility[")), "{failed:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL compatibility["));
}

#[test]
fn os_ou_report_has_rank_one_and_decay() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "os_ou.json", example("os_ou").unwrap().json);
    let csv = dir.path().join("curves");
    let out = kerflow(
        &["run", "--stable-output", "--csv-dir", csv.to_str().unwrap()],
        Some(&path),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["values"]["rank"], 1.0);
    assert!(report.get("timings").is_none());
    let rows = report["curves"][0]["rows"].as_array().unwrap();
    let at = rows.iter().find(|r| r[0] == 0.3).unwrap()[2].as_f64().unwrap();
    assert!((at - 0.74082).abs() < 1e-5);
    let text = std::fs::read_to_string(csv.join("semigroup_eigenvalues.csv")).unwrap();
    assert!(text.starts_with("t,index,value\n"));
}

#[test]
fn seed_override_changes_sampled_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "flows.json", example("flow_laws").unwrap().json);
    let base = kerflow(&["run", "--stable-output"], Some(&path)).stdout;
    let again = kerflow(&["run", "--stable-output"], Some(&path)).stdout;
    assert_eq!(base, again);
    let reseeded = Command::new(env!("CARGO_BIN_EXE_kerflow"))
        .args(["run", "--stable-output"])
        .arg(&path)
        .env("KERFLOW_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(reseeded.status.code(), Some(0));
    assert_ne!(base, reseeded.stdout);
    let report: serde_json::Value = serde_json::from_slice(&reseeded.stdout).unwrap();
    assert_eq!(report["config"]["seed"], 99);
}

#[test]
fn timings_present_without_stable_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "rp.json", example("rp_axioms").unwrap().json);
    let out = kerflow(&["run"], Some(&path));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["timings"]["total_ms"].is_number());
}

#[test]
fn list_builtins_and_example() {
    let out = kerflow(&["list-builtins"], None);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "mass_shell",
        "euclidean_motion",
        "right_multiplication",
        "contraction_determinant",
    ] {
        assert!(text.contains(name), "{name}");
    }
    let out = kerflow(&["example", "os_mixture"], None);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ou_mixture"));
    assert_eq!(kerflow(&["example", "nope"], None).status.code(), Some(2));
}

#[test]
fn every_example_validates() {
    for cfg in kerflow::catalog::EXAMPLES {
        let c = kerflow::parse_config_str(cfg.json).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
        kerflow::validate(&c).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
    }
}
