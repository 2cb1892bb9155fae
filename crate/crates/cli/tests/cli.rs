use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use chameleon_core::geometry::{PathFile, ScissorsPose};
use chameleon_core::protocol::{read_message, write_message, SessionMessage, StartSession};
use chameleon_core::SeverityMode;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn clippers(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clippers")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn drift_report_counts_two_escalations() {
    let dir = tempfile::tempdir().unwrap();
    let out = clippers(&[
        "simulate",
        "--path",
        fixture("straight.path.json").to_str().unwrap(),
        "--config",
        fixture("drift_no_correction.config.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("seed-0001.metrics.json").exists());

    let out = clippers(&["report", "--json", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["aggregate"]["escalation_count"], 2);
    assert_eq!(v["aggregate"]["unanswered_cues"], 2);
    assert_eq!(v["aggregate"]["completed"], 0);
}

#[test]
fn invalid_config_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.config.json");
    std::fs::write(&config, r#"{"mount": {"sensor_spacing": -1}}"#).unwrap();
    let out = clippers(&[
        "simulate",
        "--path",
        fixture("straight.path.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mount.sensor_spacing"), "{}", stderr(&out));
}

#[test]
fn narrow_ink_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("thin.path.json");
    std::fs::write(&path, r#"{"vertices": [[0, 0], [50, 0]], "ink_width_mm": 6.5, "capture_radius_mm": 5}"#).unwrap();
    let out = clippers(&["simulate", "--path", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_trace_is_a_usage_error() {
    assert_eq!(clippers(&["replay", "/nonexistent/x.trace"]).status.code(), Some(2));
    assert_eq!(clippers(&["replay"]).status.code(), Some(2));
}

#[test]
fn serve_runs_a_session_and_records_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_clippers"))
        .args(["serve", "--port", "0", "--mode", "oracle", "--out", dir.path().to_str().unwrap()])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut log = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    log.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();

    let mut stream = TcpStream::connect(&addr).unwrap();
    let start = StartSession {
        session_id: "cli test/1".into(),
        path: PathFile {
            vertices: vec![[0.0, 0.0], [100.0, 0.0]],
            ink_width_mm: 8.0,
            capture_radius_mm: 5.0,
        },
        mode: Some(SeverityMode::Oracle),
        config: None,
    };
    write_message(&mut stream, &SessionMessage::StartSession(Box::new(start))).unwrap();
    let mut kinds = Vec::new();
    for (i, x) in [5.0, 50.0, 100.0].into_iter().enumerate() {
        let pose = ScissorsPose::at(x, 0.0, 0.0, i as u64 * 20);
        write_message(&mut stream, &SessionMessage::PoseUpdate(pose)).unwrap();
        kinds.push(read_message(&mut stream).unwrap().unwrap().kind());
    }
    let end = read_message(&mut stream).unwrap().unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert_eq!(kinds, ["FeedbackUpdate"; 3]);
    match end {
        SessionMessage::EndSession(e) => assert_eq!(e.reason, "completed"),
        other => panic!("expected EndSession, got {other:?}"),
    }
    let traces: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(traces.len(), 1, "{traces:?}");
    let out = clippers(&["replay", traces[0].to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
