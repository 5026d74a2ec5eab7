//! End-to-end checks of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

const BIN: &str = env!("CARGO_BIN_EXE_secrecy-regions");

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should launch")
}

fn write_wiretap_channel(path: &Path) {
    // BSC(0.1) to the receiver, a further BSC(0.2) to the eavesdropper.
    fs::write(
        path,
        r#"{"input_size":2,"receivers":[2],"eavesdropper":2,
            "joint":[[0.72,0.18,0.02,0.08],[0.08,0.02,0.18,0.72]]}"#,
    )
    .unwrap();
}

#[test]
fn fme_eliminates_the_middle_variable() {
    let dir = tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    fs::write(
        &sys,
        r#"[{"coeffs":{"y":1.0},"bound":2.0},
            {"coeffs":{"x":1.0,"y":-1.0},"bound":0.0}]"#,
    )
    .unwrap();
    let out = run(&["fme", "--in", "sys.json", "--eliminate", "y"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(
        parsed,
        serde_json::json!([{"coeffs": {"x": 1.0}, "bound": 2.0}])
    );
}

#[test]
fn compute_region_is_deterministic() {
    let dir = tempdir().unwrap();
    write_wiretap_channel(&dir.path().join("ch.json"));
    for name in ["a.json", "b.json"] {
        let out = run(
            &["compute-region", "--theorem", "1", "--channel", "ch.json", "--out", name],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b, "repeated runs must produce byte-identical output");
}

#[test]
fn invalid_channel_exits_2_with_the_row_index() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"input_size":2,"receivers":[2],"eavesdropper":1,
            "joint":[[0.5,0.5],[0.5,0.6]]}"#,
    )
    .unwrap();
    let out = run(
        &["compute-region", "--theorem", "1", "--channel", "bad.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("row 1"), "{err}");
}

#[test]
fn check_order_reports_degradedness_with_a_witness() {
    let dir = tempdir().unwrap();
    write_wiretap_channel(&dir.path().join("ch.json"));
    let out = run(
        &["check-order", "--channel", "ch.json", "--pair", "Y1,Z", "--mode", "degraded"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["relation"], "Degraded");
    assert!(v["verdict"]["witness"]["matrix"].is_array());
}

#[test]
fn unknown_terminal_exits_2() {
    let dir = tempdir().unwrap();
    write_wiretap_channel(&dir.path().join("ch.json"));
    let out = run(
        &["check-order", "--channel", "ch.json", "--pair", "Y7,Z", "--mode", "degraded"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Y7"));
}

#[test]
fn export_frontier_writes_the_expected_header() {
    let dir = tempdir().unwrap();
    write_wiretap_channel(&dir.path().join("ch.json"));
    let out = run(
        &["compute-region", "--theorem", "1", "--channel", "ch.json", "--out", "region.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(
        &["export-frontier", "--in", "region.json", "--out", "frontier.csv", "--samples", "16"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("R0,R1,piece_id"));
    assert!(lines.next().is_some(), "frontier should contain samples");
}

#[test]
fn simulate_code_emits_a_machine_readable_report() {
    let dir = tempdir().unwrap();
    write_wiretap_channel(&dir.path().join("ch.json"));
    let out = run(
        &[
            "simulate-code", "--channel", "ch.json", "--scheme", "superposition",
            "--n", "6", "--rates", "0.0,0.125", "--trials", "200", "--seed", "7",
            "--exact-equivocation", "--out", "report.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["trials"], 200);
    assert_eq!(v["report"]["error_estimates"].as_array().unwrap().len(), 1);
    assert!(!v["report"]["equivocation"].as_array().unwrap().is_empty());
    assert_eq!(v["manifest"]["seed"], 7);
}

#[test]
fn bad_thread_cap_exits_2() {
    let dir = tempdir().unwrap();
    write_wiretap_channel(&dir.path().join("ch.json"));
    let out = Command::new(BIN)
        .args(["check-order", "--channel", "ch.json", "--pair", "Y1,Z", "--mode", "degraded"])
        .current_dir(dir.path())
        .env("SECRECY_REGIONS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SECRECY_REGIONS_THREADS"));
}
