use std::process::{Command, Output};

fn sbcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbcm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn version_and_schema() {
    let out = sbcm(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
    let out = sbcm(&["--schema"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("counts.csv"));
}

#[test]
fn analytic_reports_the_critical_gamma() {
    let out = sbcm(&["analytic", "--delta", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["critical_gammas"]["gamma_c"], 1.0);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["steady", "-t", "ring:4", "-g", "1", "-d", "0.5"][..],
        &["frobnicate"][..],
        &["sweep", "--experiment", "family_counts", "-t", "karate", "-g", "1:2:2", "-d", "0.5:0.5:1", "-o", "/tmp/x"][..],
    ] {
        let out = sbcm(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_input_file_exits_with_two() {
    let out = sbcm(&["steady", "-t", "json:/nonexistent/graph.json", "-g", "1", "-d", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/graph.json"));
}

#[test]
fn simulate_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = sbcm(&["simulate", "-t", "path:4", "-g", "2", "-d", "0.5", "--horizon", "5", "-o", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("t,x_0,x_1,x_2,x_3,x_4,x_5\n"));
}
