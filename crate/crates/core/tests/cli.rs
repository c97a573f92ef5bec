//! The binary end to end: run, trace, check, scenarios and configuration.

use std::fs::File;
use std::io::BufReader;
use std::process::Command;

use causalkv::checker;
use causalkv::transport::trace::read_jsonl;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_causalkv"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("CKV_")) {
        c.env_remove(k);
    }
    c
}

#[test]
fn run_writes_a_trace_that_checks_clean() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("run.jsonl");
    let out = bin()
        .args(["run", "--engine", "cclo", "--dcs", "2", "--duration", "20", "--report", "csv", "--trace-out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("engine,rot_mode"));

    let events = read_jsonl(BufReader::new(File::open(&trace).unwrap())).unwrap();
    assert!(checker::check(&events).unwrap().passed());

    let out = bin().arg("check").arg(&trace).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("verdict             pass"));
}

#[test]
fn environment_overrides_config_file_and_flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "engine = \"cure\"\nduration_ms = 10\nclients = 4\n").unwrap();
    let run = |envs: &[(&str, &str)], flags: &[&str]| {
        let mut c = bin();
        c.args(["run", "--report", "jsonl", "--config"]).arg(&cfg).args(flags);
        for (k, v) in envs {
            c.env(k, v);
        }
        let out = c.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (v["engine"].as_str().unwrap().to_string(), v["clients"].as_u64().unwrap())
    };
    assert_eq!(run(&[], &[]), ("cure".into(), 4));
    assert_eq!(run(&[("CKV_ENGINE", "cclo")], &[]), ("cclo".into(), 4));
    assert_eq!(run(&[("CKV_ENGINE", "cclo")], &["--engine", "contrarian", "--clients", "2"]), ("contrarian".into(), 2));
}

#[test]
fn partial_replication_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "dcs = 2\nreplication_factor = 1\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("partial replication"));
}

#[test]
fn scenario_exit_status_reflects_the_verdict() {
    let ok = bin().args(["scenario", "fig1", "--engine", "contrarian"]).output().unwrap();
    assert!(ok.status.success());
    let bad = bin().args(["scenario", "fig1", "--engine", "strawman_latest"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let unknown = bin().args(["scenario", "fig9"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}
