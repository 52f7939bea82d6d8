//! End-to-end smoke tests for the `cold` command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cold"))
}

fn repo_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(repo_root().join("scenarios/convoy_straight.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("frames.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "frame_id,mode,mse_left,mse_right,max_left,max_right,p95,range_m,runtime_us"
    );
    assert_eq!(lines.count(), 50);
    assert!(csv.contains(",convoy,"));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("frames"), "summary: {summary}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("frames"), "stdout: {stdout}");
}

#[test]
fn report_reads_back_run_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = bin()
        .arg("run")
        .arg(repo_root().join("scenarios/spline_curve.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = bin().arg("report").arg(dir.path()).output().unwrap();
    assert!(
        report.status.success(),
        "{}",
        String::from_utf8_lossy(&report.stderr)
    );
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("frames"), "report: {text}");
}

#[test]
fn missing_scenario_is_a_config_error() {
    let out = bin().arg("run").arg("/nonexistent.scn").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_scenario_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "road.segments = straight -5\n").unwrap();
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!err.is_empty());
}

#[test]
fn bench_prints_runtime_stats() {
    let out = bin()
        .arg("bench")
        .arg(repo_root().join("scenarios/spline_curve.scn"))
        .arg("--repeat")
        .arg("2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("runtime"), "bench: {text}");
}
