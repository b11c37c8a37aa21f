//! Binary-level checks: flag handling, exit codes, and the machine-readable
//! error record.

use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decoyqkd"))
}

fn tmpdir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("decoyqkd-bin-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = binary().arg("--frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_mode_exits_with_usage_code() {
    let out = binary().args(["--mode", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("\"error\":\"usage\""), "stderr: {err}");
}

#[test]
fn numeric_precondition_exits_2_with_json_record() {
    let dir = tmpdir("numeric");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "mode = bounds\nmethod = simplified\nchi = 1\n").unwrap();
    let out = binary()
        .args(["--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("\"error\":\"numeric\""), "stderr: {err}");
}

#[test]
fn validation_failure_exits_3() {
    let dir = tmpdir("validation");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "eta_d = 1.5\n").unwrap();
    let out = binary()
        .args(["--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("\"error\":\"validation\""), "stderr: {err}");
}

#[test]
fn bounds_mode_succeeds_and_writes_the_table() {
    let dir = tmpdir("ok");
    let out_path = dir.join("bounds.csv");
    let out = binary()
        .args(["--mode", "bounds", "--out", out_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("# tool: decoyqkd"));
    assert!(text.contains("method,chi,epsilon,lower,upper"));
}
