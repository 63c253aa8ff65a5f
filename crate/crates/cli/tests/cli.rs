use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "../../corpus", rel]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn ctrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctrd"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_accepts_and_rejects() {
    let ok = ctrd(&["check", &corpus("accept/con_counter.ctrd")]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = ctrd(&["check", &corpus("reject/stock_guard.ctrd")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("EffectViolation"));
}

#[test]
fn missing_file_is_an_io_error() {
    assert_eq!(
        ctrd(&["check", "/nonexistent/x.ctrd"]).status.code(),
        Some(2)
    );
}

#[test]
fn run_reports_checks() {
    let o = ctrd(&[
        "run",
        &corpus("ava/set_adds.ctrd"),
        "--check",
        "sc,ec,wf,progress",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("outcome quiescent"));
    assert!(out.contains("CHECK ec eventual_visibility=OK rval=OK converged=OK"));
}

#[test]
fn step_limit_is_not_quiescent() {
    let o = ctrd(&["run", &corpus("ava/set_adds.ctrd"), "--max-steps", "3"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn explore_finds_the_anomaly() {
    let f = corpus("mixed/anomaly.ctrd");
    let full = ctrd(&[
        "explore",
        &f,
        "--max-depth",
        "14",
        "--check",
        "sc",
        "--history",
        "full",
    ]);
    assert_eq!(full.status.code(), Some(3));
    assert!(stdout(&full).contains("schedule:"));
    let con = ctrd(&[
        "explore",
        &f,
        "--max-depth",
        "14",
        "--check",
        "sc",
        "--history",
        "con",
    ]);
    assert_eq!(con.status.code(), Some(0));
}

#[test]
fn nif_exit_codes() {
    let same = ctrd(&[
        "nif",
        &corpus("nif/counter_a.ctrd"),
        &corpus("nif/counter_b.ctrd"),
    ]);
    assert_eq!(same.status.code(), Some(0));
    let differ = ctrd(&[
        "nif",
        &corpus("nif/con_diff_a.ctrd"),
        &corpus("nif/con_diff_b.ctrd"),
    ]);
    assert_eq!(differ.status.code(), Some(5));
}

#[test]
fn seeded_runs_replay() {
    let f = corpus("ava/read_modify.ctrd");
    let a = ctrd(&["run", &f, "--seed", "7", "--trace", "-"]);
    let b = ctrd(&["run", &f, "--seed", "7", "--trace", "-"]);
    assert_eq!(a.stdout, b.stdout);
    let c = ctrd(&["run", &f, "--seed", "8", "--trace", "-"]);
    assert!(a.status.success() && c.status.success());
}

#[test]
fn report_is_json() {
    let dir = std::env::temp_dir().join(format!("ctrd-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let report = dir.join("report.json");
    let o = ctrd(&[
        "run",
        &corpus("con/update_race.ctrd"),
        "--check",
        "sc",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["quiescent"], serde_json::Value::Bool(true));
    let sc = v["verdicts"]["sc"].as_object().unwrap();
    assert!(!sc.is_empty() && sc.values().all(|b| b == true));
    assert_eq!(v["observation"]["(con, 1)"], "nat 5");
    std::fs::remove_dir_all(dir).unwrap();
}
