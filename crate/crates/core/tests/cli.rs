mod common;

use common::scenario_path;
use std::process::Command;

fn horus() -> Command {
    Command::new(env!("CARGO_BIN_EXE_horus"))
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = horus()
        .arg("run")
        .arg(scenario_path("baseline_onboard.toml"))
        .args(["--seed", "4", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["drive_log.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = horus().arg("summarize").arg(&out).output().unwrap();
    assert!(summary.status.success());
    let text = String::from_utf8(summary.stdout).unwrap();
    assert!(text.contains("baseline_onboard (seed 4)"), "{text}");
}

#[test]
fn sweep_writes_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = horus()
        .arg("sweep")
        .arg(scenario_path("kp_sweep.toml"))
        .args(["--axis", "kp", "--values", "1:2:0.5", "--reps", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        stdout
            .lines()
            .filter(|l| l.trim_start().starts_with(['1', '2']))
            .count(),
        3,
        "{stdout}"
    );
    assert!(dir.path().join("table.json").is_file());
}

#[test]
fn bad_input_fails_cleanly() {
    let out = horus().args(["run", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = horus()
        .arg("sweep")
        .arg(scenario_path("kp_sweep.toml"))
        .args(["--axis", "speed", "--values", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
