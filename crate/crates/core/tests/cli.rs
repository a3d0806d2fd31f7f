use std::path::Path;
use std::process::Command;

use drillsim_core::harness::{read_trials_csv, ArmSummary};
use drillsim_core::{Arm, BatchSummary, Classification};

fn drillsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_drillsim")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn ablation_writes_consistent_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = drillsim(&["--ablation", "--trials", "3", "--seed", "5", "--out", &out_arg(&out), "--dump-surface", "--traces"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rows = read_trials_csv(&std::fs::read(out.join("trials.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 12);
    let summary: BatchSummary = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    for arm in Arm::ALL {
        let recomputed = ArmSummary::from_records(arm, &rows);
        let stored = summary.arm(arm).unwrap();
        assert_eq!(recomputed.trials, 3);
        let total: f64 = Classification::ALL.iter().map(|&c| stored.rate(c)).sum();
        assert!((total - 100.0).abs() < 1e-9);
        for c in Classification::ALL {
            assert!((recomputed.rate(c) - stored.rate(c)).abs() < 1e-9);
        }
        // The CSV rounds times to microminutes.
        match (recomputed.mean_time_min, stored.mean_time_min) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-5),
            (a, b) => assert_eq!(a.is_some(), b.is_some()),
        }
        assert!(out.join(format!("traces/{arm}_0002.csv")).exists());
    }
    assert!(out.join("surfaces/surface_0000.csv").exists());
    let trace = std::fs::read_to_string(out.join("traces/full_0000.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "cycle,sim_time_s,drill_angle_rad,min_c,mean_c,criterion_met,ruptured"
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = drillsim(&["--arm", "plane", "--profile", "mouse", "--trials", "4", "--seed", "9", "--out", &out_arg(dir)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(a.join("trials.csv")).unwrap(), std::fs::read(b.join("trials.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("summary.json")).unwrap(), std::fs::read(b.join("summary.json")).unwrap());
}

#[test]
fn config_file_overrides_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"arm": "baseline", "trials": 5, "surface": {"tilt_deg_max": 4.0}}"#).unwrap();
    let out = tmp.path().join("o");
    let o = drillsim(&["--config", cfg.to_str().unwrap(), "--trials", "2", "--out", &out_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_trials_csv(&std::fs::read(out.join("trials.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.arm == Arm::Baseline));
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 2, "bogus": 1}"#).unwrap();
    assert_eq!(drillsim(&["--config", bad.to_str().unwrap()]).status.code(), Some(1));
    let tilt = tmp.path().join("tilt.json");
    std::fs::write(&tilt, r#"{"surface": {"tilt_deg_max": 40.0}}"#).unwrap();
    assert_eq!(drillsim(&["--config", tilt.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(drillsim(&["--config", tmp.path().join("missing.json").to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(drillsim(&["--arm", "laser"]).status.code(), Some(1));
    assert_eq!(drillsim(&["--trials", "0"]).status.code(), Some(1));
}

#[test]
fn io_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("nested");
    assert_eq!(drillsim(&["--trials", "1", "--out", &out_arg(&out)]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let o = drillsim(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("--ablation"));
}
