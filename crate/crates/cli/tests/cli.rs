use std::path::PathBuf;
use std::process::{Command, Output};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn dgui(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgui")).args(args).output().unwrap()
}

fn scene() -> String {
    assets().join("scene.json").display().to_string()
}

#[test]
fn bench_ycb_json() {
    let out = dgui(&["bench", "ycb", "--scene", &scene(), "--seed", "0", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["total_score"], 16);
    assert_eq!(report["blocks"].as_array().unwrap().len(), 8);
}

#[test]
fn bench_ycb_with_noise_file_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let noise = dir.path().join("noise.json");
    std::fs::write(&noise, r#"{"gaze_sigma_px": 5.0}"#).unwrap();
    let out = dgui(&["bench", "ycb", "--scene", &scene(), "--seed", "3", "--noise", noise.to_str().unwrap(), "--table"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("score") && text.contains("/ 16"));

    std::fs::write(&noise, r#"{"marker_dropout": 1.5}"#).unwrap();
    let out = dgui(&["bench", "ycb", "--scene", &scene(), "--noise", noise.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn record_then_replay_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("s.jsonl");
    let session = session.to_str().unwrap();
    let out = dgui(&["record", "--scene", &scene(), "--policy", "oracle", "--out", session, "--max-seconds", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(session).unwrap().lines().count(), 400);

    let registry = assets().join("registry").display().to_string();
    let a = dgui(&["replay", "--in", session, "--registry", &registry]);
    let b = dgui(&["replay", "--in", session, "--registry", &registry]);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);

    // Corrupt line 17.
    let text = std::fs::read_to_string(session).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[16] = "{\"t\":";
    let broken = dir.path().join("broken.jsonl");
    std::fs::write(&broken, lines.join("\n")).unwrap();
    let out = dgui(&["replay", "--in", broken.to_str().unwrap(), "--registry", &registry]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 17"));
}

#[test]
fn latency_json() {
    let out = dgui(&["latency", "--scene", &scene(), "--seconds", "1", "--json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["frames"], 50);
    assert!(report["total"]["mean_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn validation_errors_exit_1() {
    assert_eq!(dgui(&["bench", "ycb", "--scene", "/nonexistent/scene.json"]).status.code(), Some(1));
    assert_eq!(dgui(&["bench", "ycb"]).status.code(), Some(1));
    assert_eq!(dgui(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dgui(&["--help"]).status.code(), Some(0));
}

#[test]
fn serve_on_busy_port_exits_1() {
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let out = dgui(&["serve", "--scene", &scene(), "--port", &port]);
    assert_eq!(out.status.code(), Some(1));
}
