//! Process-level CLI behavior: exit codes, config diagnostics, sweep fan-out.

use std::process::Command;

fn kamforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kamforge"))
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "model": "standard", "epsilon": "large", "target": 1.0}"#,
    )
    .unwrap();
    let out = kamforge().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("epsilon"), "stderr: {stderr}");

    // Syntax errors surface serde's line/column diagnostics.
    std::fs::write(&path, "{\"schema_version\": 1,\n  \"model\": oops}").unwrap();
    let out = kamforge().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "stderr: {stderr}");
}

#[test]
fn unknown_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "model": "no-such-map", "epsilon": 1e-4, "target": "golden"}"#,
    )
    .unwrap();
    let out = kamforge().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-map"));
}

#[test]
fn sweep_writes_isolated_directories() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "model": "param-analytic", "epsilon": 1e-4, "target": "golden"}"#,
    )
    .unwrap();
    let out_root = dir.path().join("sweep");
    let out = kamforge()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_root)
        .args(["--sweep", "eps=1e-5..1e-4:geometric:3"])
        .env("KAMFORGE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for idx in 0..3 {
        let sub = out_root.join(format!("eps_{idx:03}"));
        for file in ["steps.csv", "ledger.csv", "result.json", "report.txt"] {
            assert!(sub.join(file).is_file(), "missing {file} in {}", sub.display());
        }
    }
    // The middle member ran at the geometric midpoint.
    let mid = std::fs::read_to_string(out_root.join("eps_001").join("result.json")).unwrap();
    assert!(mid.contains("\"epsilon\":3.16227766016838"), "{mid}");
}

#[test]
fn verify_subcommands_exit_codes() {
    // A resonant frequency fails the scan with exit 2.
    let out = kamforge()
        .args(["verify", "diophantine", "--omega", "3.141592653589793", "--tau", "1.5", "--gamma", "0.5", "--kmax", "8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("satisfied: false"));

    let out = kamforge()
        .args(["verify", "degree", "--map", "monotone-cubic", "--p", "golden"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1");
}

#[test]
fn residual_verification_roundtrips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "model": "param-analytic", "epsilon": 1e-4, "target": "golden"}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = kamforge()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    let out = kamforge().args(["verify", "residual", "--run"]).arg(&out_dir).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    // The recomputed residual agrees with the recorded one byte for byte:
    // both lines carry the identical 17-digit value.
    let mut lines = stdout.lines();
    let recomputed = lines.next().unwrap().strip_prefix("residual: ").unwrap();
    let recorded = lines.next().unwrap().strip_prefix("recorded: ").unwrap();
    assert_eq!(recomputed, recorded);
}
