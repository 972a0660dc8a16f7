use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgrad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("json on stderr");
    v["error"]["kind"].as_str().unwrap().to_string()
}

const TINY: &[&str] = &[
    "--n", "4", "--b", "2", "--circuits", "3", "--reps", "2", "--shots-grid", "16,64,256",
    "--teacher-shots", "5000", "--depth", "2", "--seed", "11",
];

fn run_tiny(cmd: &str, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![cmd];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", out.to_str().unwrap()]);
    stdout_json(&qgrad(&args))
}

#[test]
fn single_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_tiny("single", a.path(), &[]);
    let rb = run_tiny("single", b.path(), &[]);
    assert_eq!(ra["summaries"].as_array().unwrap().len(), 3);
    let da = PathBuf::from(ra["run_dir"].as_str().unwrap());
    let db = PathBuf::from(rb["run_dir"].as_str().unwrap());
    for name in ["records.jsonl", "frontier.csv", "config.json"] {
        assert_eq!(std::fs::read(da.join(name)).unwrap(), std::fs::read(db.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn worker_override_keeps_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = vec!["multi"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--subspace", "3", "--out", a.path().to_str().unwrap()]);
    let one = Command::new(env!("CARGO_BIN_EXE_qgrad"))
        .args(&args)
        .env("QGRAD_WORKERS", "1")
        .output()
        .unwrap();
    let ra = stdout_json(&one);
    let rb = run_tiny("multi", b.path(), &["--subspace", "3"]);
    let da = PathBuf::from(ra["run_dir"].as_str().unwrap());
    let db = PathBuf::from(rb["run_dir"].as_str().unwrap());
    assert_eq!(std::fs::read(da.join("records.jsonl")).unwrap(), std::fs::read(db.join("records.jsonl")).unwrap());

    let bad = Command::new(env!("CARGO_BIN_EXE_qgrad"))
        .args(&args)
        .env("QGRAD_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(error_kind(&bad), "invalid-argument");
}

#[test]
fn failures_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(error_kind(&qgrad(&["single", "--n", "5", "--out", out])), "invalid-argument");
    assert_eq!(error_kind(&qgrad(&["single", "--heads", "mse", "--out", out])), "invalid-argument");
    assert_eq!(error_kind(&qgrad(&["single", "--shots-grid", "2^7..x", "--out", out])), "invalid-argument");
    assert_eq!(error_kind(&qgrad(&["bsweep", "--b-list", "2", "--out", out])), "invalid-argument");
    assert_eq!(error_kind(&qgrad(&["report", "--run", out])), "invalid-argument");
    assert_eq!(error_kind(&qgrad(&["frobnicate"])), "usage");
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn multi_then_scaling_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let multi = run_tiny("multi", tmp.path(), &["--n", "4,6,8,10,12", "--subspace", "3", "--exact-only"]);
    let dir = multi["run_dir"].as_str().unwrap();
    let table = stdout_json(&qgrad(&["scaling", "--from", dir]));
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
    assert!(Path::new(dir).join("scaling.csv").is_file());
    let rep = stdout_json(&qgrad(&["report", "--run", dir]));
    assert_eq!(rep["circuits"].as_u64(), Some(5 * 3 * 3));
    assert_eq!(rep["checksum"], multi["checksum"]);
}

#[test]
fn nullmodel_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    let mut value: Value = serde_json::from_slice(
        &qgrad(&["single", "--n", "4", "--b", "2", "--circuits", "2", "--reps", "2", "--shots-grid", "8",
                 "--depth", "1", "--out", tmp.path().to_str().unwrap()])
            .stdout,
    )
    .unwrap();
    let run_dir = PathBuf::from(value["run_dir"].take().as_str().unwrap());
    let mut config: Value = serde_json::from_slice(&std::fs::read(run_dir.join("config.json")).unwrap()).unwrap();
    config["null_menu"] = serde_json::json!([{ "m": 64, "params": { "kind": "isotropic" } }]);
    std::fs::write(&cfg, config.to_string()).unwrap();
    let rep = stdout_json(&qgrad(&[
        "nullmodel", "--config", cfg.to_str().unwrap(), "--samples", "5000", "--out", tmp.path().to_str().unwrap(),
    ]));
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["menu"]["d_eff"].as_f64(), Some(64.0));
}
