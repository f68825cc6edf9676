use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn gemel_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gemel-sim")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gemel-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn error_record(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stderr).expect("stderr is a JSON record");
    assert!(v["message"].is_string());
    v
}

#[test]
fn match_pair_reports_overlap() {
    let o = gemel_sim(&["match", "--pair", "r18", "r34"]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["shared_layers"], 41);
}

#[test]
fn match_workload_reports_optimal_savings() {
    let o = gemel_sim(&["match", "--workload", "LP2"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["workload"], "LP2");
    assert!(v["optimal_bytes"].as_u64().unwrap() > 0);
}

#[test]
fn unknown_workload_is_a_json_error() {
    let o = gemel_sim(&["merge", "--workload", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["kind"], "unknown_workload");
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_2_with_a_record() {
    let o = gemel_sim(&["bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["kind"], "usage");
}

#[test]
fn help_succeeds() {
    let o = gemel_sim(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("simulate"));
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = scratch("badcfg");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "seed = 1\nno_such_field = true\n").unwrap();
    let o = gemel_sim(&["--config", path.to_str().unwrap(), "match", "--pair", "r18", "r34"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["kind"], "config");
    let missing = gemel_sim(&["--config", "/nonexistent/x.toml", "match", "--pair", "r18", "r34"]);
    assert_eq!(error_record(&missing)["kind"], "io");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn merge_plan_feeds_profile_and_simulate() {
    let dir = scratch("plan");
    let plan = dir.join("lp2.json");
    let o = gemel_sim(&["--seed", "7", "merge", "--workload", "LP2", "--out", plan.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(written["seed"], 7);
    assert_eq!(written["strategy"], "gemel");

    let p = gemel_sim(&["profile", "--workload", "LP2", "--plan", plan.to_str().unwrap()]);
    assert!(p.status.success());
    assert_eq!(stdout_json(&p)["feasible"], true);

    let trace = dir.join("trace.csv");
    let s = gemel_sim(&[
        "simulate",
        "--workload",
        "LP2",
        "--level",
        "50",
        "--plan",
        plan.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(s.status.success());
    let report = stdout_json(&s);
    assert_eq!(report["workload_id"], "LP2");
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.lines().count() > 1);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn mainstream_plans_are_accepted_by_simulate() {
    let dir = scratch("mainstream");
    let plan = dir.join("m.json");
    let o = gemel_sim(&["merge", "--workload", "MP2", "--strategy", "mainstream", "--out", plan.to_str().unwrap()]);
    assert!(o.status.success());
    let s = gemel_sim(&["simulate", "--workload", "MP2", "--plan", plan.to_str().unwrap()]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn unknown_level_and_strategy_are_errors() {
    let o = gemel_sim(&["simulate", "--workload", "LP2", "--level", "90"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["kind"], "config");
    let o = gemel_sim(&["merge", "--workload", "LP2", "--strategy", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    error_record(&o);
}

#[test]
fn experiment_writes_a_bundle() {
    let dir = scratch("experiment");
    let cfg = dir.join("small.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 3\n\n[corpus]\nworkloads = [\"{}\"]\n\n[memory]\nlevels = [\"min\"]\n\n[experiment]\nstrategies = [\"gemel\"]\nsimulate = [\"gemel\"]\n",
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/workloads/LP2.csv")
        ),
    )
    .unwrap();
    let out = dir.join("out");
    let o = gemel_sim(&["--config", cfg.to_str().unwrap(), "experiment", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["failed_cells"], 0);
    assert_eq!(v["bundle_hash"].as_str().unwrap().len(), 64);
    assert!(out.join("manifest.json").exists());
    std::fs::remove_dir_all(dir).unwrap();
}
