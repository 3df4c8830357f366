use std::path::Path;
use std::process::{Command, Output};

use mfem_stab::config::ScenarioConfig;
use serde_json::Value;

fn mfem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfem-stab"))
        .args(args)
        .current_dir(dir)
        .env("MFEM_STAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("error json on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn negative_critical_current_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"material": {"j_c": -3e8}}"#);
    let out_dir = tmp.path().join("out");
    let out = mfem(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn two_refinements_are_rejected_for_the_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = mfem(&["infsup", "--refinements", "2", "--out", out_dir.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn malformed_pairing_and_unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfem(&["mesh", "--pairing", "3,1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_config(tmp.path(), "typo.json", r#"{"geometri": {}}"#);
    let out = mfem(&["mesh", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(listing(tmp.path()) == ["typo.json"]);
}

#[test]
fn unconverged_transient_exits_3_with_error_file_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tape.json", r#"{"scenario": "SINGLE_TAPE", "geometry": {"refinements": 1}}"#);
    let out_dir = tmp.path().join("out");
    let out = mfem(&["solve", "--config", &cfg, "--pairing", "2,1", "--out", out_dir.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(listing(&out_dir), ["error.json"]);
    let err: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["error"], "nonconvergence");
    assert!(err["step"].is_u64());
    assert!(err["residual_trace"].is_array());
}

#[test]
fn mesh_command_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tape.json", r#"{"scenario": "SINGLE_TAPE", "geometry": {"refinements": 0}}"#);
    let out_dir = tmp.path().join("m");
    let out = mfem(&["mesh", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--quiet"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert_eq!(listing(&out_dir), ["config.resolved.json", "mesh.json", "mesh.txt", "run.json"]);

    let text = std::fs::read_to_string(out_dir.join("mesh.txt")).unwrap();
    let mesh = mfem_stab::mesh::read_native(&text).unwrap();
    assert_eq!(mesh.tapes().len(), 1);

    // the resolved configuration reproduces the run
    let resolved = ScenarioConfig::from_file(&out_dir.join("config.resolved.json")).unwrap();
    assert_eq!(resolved.resolved().unwrap(), resolved);
}

#[test]
fn solve_writes_histories_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tape.json",
        r#"{"scenario": "SINGLE_TAPE", "geometry": {"refinements": 1}, "time": {"ramp_steps": 5}}"#,
    );
    let out_dir = tmp.path().join("s");
    let out = mfem(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = listing(&out_dir);
    for f in ["current_0.csv", "voltage_0.csv", "newton.csv", "tape_0_current.csv", "metrics.json", "final_state.txt"] {
        assert!(files.iter().any(|n| n == f), "missing {f} in {files:?}");
    }
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    let tape = &metrics["tape_0"];
    assert!(tape["oscillation"].as_f64().unwrap() >= 1.0);
    let imposed = metrics["currents"][0].as_f64().unwrap();
    let sampled = tape["profile_current"].as_f64().unwrap();
    assert!((sampled - imposed).abs() <= 1e-10 * imposed.abs(), "{sampled} vs {imposed}");
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stdout.is_object());
}

#[test]
fn schema_file_is_current() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfem(&["schema"], tmp.path());
    assert!(out.status.success());
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let committed: Value =
        serde_json::from_str(&std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/config.schema.json")).unwrap())
            .unwrap();
    assert_eq!(printed, ScenarioConfig::schema());
    assert_eq!(committed, printed);
}
