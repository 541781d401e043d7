use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_unifconserv"));
    c.env_remove("UNIFCONSERV_OUTPUT_DIR").env_remove("UNIFCONSERV_WORKERS");
    c
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn write_config(dir: &Path, env: &str) -> std::path::PathBuf {
    let path = dir.join("exp.json");
    let cfg = format!(
        r#"{{
  "env": {env},
  "agents": [
    {{"kind": "unif_conserv_ucbvi", "config": {{"bonus_scale": 0.01}}}},
    {{"kind": "baseline_only"}}
  ],
  "total_episodes": 25,
  "eta_values": [0.4],
  "seeds": [0, 1],
  "warm_start_episodes": 30,
  "output_dir": "{}"
}}"#,
        dir.join("results").display()
    );
    fs::write(&path, cfg).unwrap();
    path
}

const ERGODIC: &str = r#"{"kind": "random_ergodic", "S": 3, "A": 2, "H": 12, "min_transition_prob": 0.1, "seed": 1}"#;

#[test]
fn gen_env_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    let out = bin().args(["gen-env", "--kind", "inventory", "--out"]).arg(&env).output().unwrap();
    assert!(out.status.success());
    let mdp: serde_json::Value = serde_json::from_str(&fs::read_to_string(&env).unwrap()).unwrap();
    assert_eq!((mdp["S"].as_u64(), mdp["A"].as_u64(), mdp["H"].as_u64()), (Some(6), Some(6), Some(20)));

    let out = bin().args(["check", "--env"]).arg(&env).args(["--eta", "0.1"]).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["upsilon"], "unbounded");
    assert_eq!(report["diameter_ok"], false);
    assert_eq!(report["single_step_ok"], false);
}

#[test]
fn gen_env_spec_only() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("spec.json");
    let out = bin()
        .args(["gen-env", "--kind", "random-ergodic", "--spec-only", "--states", "4", "--out"])
        .arg(&env)
        .output()
        .unwrap();
    assert!(out.status.success());
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(&env).unwrap()).unwrap();
    assert_eq!(spec["kind"], "random_ergodic");
    assert_eq!(spec["S"], 4);
}

#[test]
fn run_writes_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ERGODIC);
    let out = bin().arg("run").arg("--config").arg(&cfg).args(["--trace", "--workers", "2"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let status: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(status["cells"], 4);
    assert_eq!(status["failed"], 0);
    let results = dir.path().join("results");
    assert!(results.join("summary.json").exists());
    assert!(results.join("cells/unif_conserv_ucbvi__eta0.4__seed1.trace.csv").exists());
    let csv = fs::read_to_string(results.join("cells/baseline_only__eta0.4__seed0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn env_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ERGODIC);
    let elsewhere = dir.path().join("elsewhere");
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .env("UNIFCONSERV_OUTPUT_DIR", &elsewhere)
        .env("UNIFCONSERV_WORKERS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(elsewhere.join("summary.json").exists());
    assert!(!dir.path().join("results").exists());
}

#[test]
fn assumption_failure_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "inventory"}"#);
    let out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "assumption");
    assert!(err["error"]["message"].as_str().unwrap().contains("--force"));
}

#[test]
fn bad_inputs_report_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = bin().arg("run").arg("--config").arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"S":2,"A":1,"H":3,"s1":0,"P":[[[0.5,0.6]],[[1.0,0.0]]],"R":[[0],[0]]}"#).unwrap();
    let out = bin().args(["check", "--env"]).arg(&bad).args(["--eta", "0.1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "invalid_model");

    let out = bin().args(["check", "--env"]).arg(&bad).arg("--eta=-1").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");
}

#[test]
fn usage_errors_are_json() {
    let out = bin().args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "usage");
    assert!(err["error"]["message"].as_str().unwrap().contains("--config"));

    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("gen-env"));
}
