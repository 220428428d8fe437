use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_barostab");

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn suite() -> PathBuf {
    repo().join("scenarios/paper-suite.json")
}

fn barostab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("BAROSTAB_OUT").output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, instance: &Value) {
    let schema = read_json(&repo().join("schemas").join(schema));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn small_strip_run() -> Value {
    json!({
        "eos": { "kind": "isentropic", "a": 1.0, "gamma": 2.0 },
        "geometry": { "kind": "strip" },
        "boundary": { "rho_b": 1.0, "u_b_minus": 0.1, "u_b_plus": 0.12, "mu": 5.0 },
        "n_cells": 64,
        "t_end": 12.0,
        "sample_dt": 1.0,
        "initial": { "kind": "perturbed", "amplitude": 0.05 },
        "order": "second",
        "viscous": "implicit",
        "transient": 2.0,
        "snapshot_times": [0.0, 12.0]
    })
}

#[test]
fn suite_file_matches_its_schema() {
    assert_valid("suite.schema.json", &read_json(&suite()));
}

#[test]
fn steady_writes_profile_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = barostab(&["steady", "--scenario", "strip-default", "--suite", suite().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("steady_report.json"));
    assert_valid("steady_report.schema.json", &report);
    assert_eq!(report["pass"], true);
    // stdout carries the same report
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed["parameter"], report["parameter"]);

    let mut rdr = csv::Reader::from_path(out.join("profile.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["r", "rho_tilde", "u_tilde", "du_tilde", "div_u", "residual_c", "residual_m"]);
    assert_eq!(rdr.records().count(), 4097);
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from-env");
    let flag_out = dir.path().join("from-flag");
    let o = Command::new(BIN)
        .args(["steady", "--scenario", "strip-constant", "--suite", suite().to_str().unwrap(), "--out", flag_out.to_str().unwrap()])
        .env("BAROSTAB_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_out.join("profile.csv").exists());
    assert!(!flag_out.exists());
}

#[test]
fn configuration_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = barostab(&["steady", "--config", "/nonexistent/config.json", "--out", out]);
    assert_eq!(missing.status.code(), Some(3));

    let unknown = barostab(&["steady", "--scenario", "no-such-scenario", "--suite", suite().to_str().unwrap(), "--out", out]);
    assert_eq!(unknown.status.code(), Some(3));

    let wrong_kind = barostab(&["evolve", "--scenario", "strip-default", "--suite", suite().to_str().unwrap(), "--out", out]);
    assert_eq!(wrong_kind.status.code(), Some(3));

    let bad = write_config(
        dir.path(),
        "bad.json",
        &json!({
            "eos": { "kind": "isentropic", "a": 1.0, "gamma": 2.0 },
            "geometry": { "kind": "strip" },
            "boundary": { "rho_b": 1.0, "u_b_minus": 0.1, "u_b_plus": 0.05, "mu": 5.0 }
        }),
    );
    let o = barostab(&["steady", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let typo = write_config(dir.path(), "typo.json", &json!({ "eos": {}, "geometry": { "kind": "strip" } }));
    assert_eq!(barostab(&["steady", "--config", typo.to_str().unwrap(), "--out", out]).status.code(), Some(3));
}

#[test]
fn numerical_failure_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_strip_run();
    cfg["wall_clock_limit"] = json!(1e-9);
    cfg["t_end"] = json!(100.0);
    let path = write_config(dir.path(), "slow.json", &cfg);
    let o = barostab(&["evolve", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evolve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", &small_strip_run());
    let out = dir.path().join("run");
    let o = barostab(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = read_json(&out.join("decay_report.json"));
    assert_valid("decay_report.schema.json", &report);
    let mut rdr = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        &header[..10],
        ["t", "E", "D", "B_in", "B_out", "T_grad", "T_press", "T_rem", "lhs_minus_rhs", "monotone_flag"]
    );
    assert_eq!(rdr.records().count(), 13);
    for t in ["0.000000", "12.000000"] {
        let snap = out.join(format!("snapshot_t{t}.csv"));
        let mut r = csv::Reader::from_path(&snap).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["r", "rho", "u"]);
        assert_eq!(r.records().count(), 64);
    }

    let verified = dir.path().join("verify");
    let o = barostab(&[
        "verify",
        "--trajectory",
        out.join("trajectory.csv").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        verified.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&verified.join("decay_report.json"));
    assert_valid("decay_report.schema.json", &v);
    assert_eq!(v, report["decay"]);
}

#[test]
fn seed_changes_only_the_phase_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", &small_strip_run());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = barostab(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        std::fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn custom_initial_data_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", &small_strip_run());
    let first = dir.path().join("first");
    assert!(barostab(&["evolve", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]).status.success());

    let mut restart = small_strip_run();
    restart["initial"] = json!({ "kind": "custom", "path": first.join("snapshot_t12.000000.csv") });
    let cfg2 = write_config(dir.path(), "restart.json", &restart);
    let second = dir.path().join("second");
    let o = barostab(&["evolve", "--config", cfg2.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_json(&first.join("decay_report.json"));
    let b = read_json(&second.join("decay_report.json"));
    let e_end = a["decay"]["final_energy"].as_f64().unwrap();
    let e_restart = b["decay"]["initial_energy"].as_f64().unwrap();
    // The snapshot stores point values, so the restart is close but not
    // bit-identical.
    assert!((e_restart - e_end).abs() <= 0.5 * e_end + 1e-12, "{e_restart} vs {e_end}");

    let mut missing = small_strip_run();
    missing["initial"] = json!({ "kind": "custom", "path": "/nonexistent.csv" });
    let cfg3 = write_config(dir.path(), "missing.json", &missing);
    assert_eq!(barostab(&["evolve", "--config", cfg3.to_str().unwrap(), "--out", second.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn sweep_records_failing_rows_without_aborting() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small_strip_run();
    base["snapshot_times"] = json!([]);
    // A negative gap makes the steady problem invalid for that row only.
    let cfg = json!({ "base": base, "parameter": "u_b_plus_minus_gap", "values": [0.02, -0.05, 0.0] });
    let path = write_config(dir.path(), "sweep.json", &cfg);
    let out = dir.path().join("sweep");
    let o = barostab(&["sweep", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("sweep_report.json"));
    assert_valid("sweep_report.schema.json", &report);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["value"], -0.05);
    assert_eq!(rows[0]["status"], "error");
    assert!(rows[0]["error"].as_str().unwrap().contains("configuration"));
    assert_eq!(rows[1]["status"], "pass");
    for i in 0..3 {
        assert_valid("sweep_row.schema.json", &read_json(&out.join(format!("rows/row_{i:03}.json"))));
    }
    // no temporary files are left behind
    let leftovers: Vec<_> = std::fs::read_dir(out.join("rows"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn amplitude_zero_sweep_rows_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small_strip_run();
    base["snapshot_times"] = json!([]);
    let cfg = json!({ "base": base, "parameter": "amplitude", "values": [0.0, 0.01] });
    let path = write_config(dir.path(), "sweep.json", &cfg);
    let out = dir.path().join("sweep");
    assert!(barostab(&["sweep", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let report = read_json(&out.join("sweep_report.json"));
    assert_eq!(report["rows"][0]["status"], "pass");
}

#[test]
fn compare_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = barostab(&["compare", "--scenario", "compare-flat-curved", "--suite", suite().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_valid("comparison_report.schema.json", &read_json(&out.join("comparison.json")));
    let mut rdr = csv::Reader::from_path(out.join("comparison.csv")).unwrap();
    assert_eq!(rdr.records().count(), 5);
}
