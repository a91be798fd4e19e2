use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plmflow"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_exit_codes() {
    let model = repo().join("models/rfq.json");
    let o = run(&["validate", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("valid"));

    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    v["lifecycles"][0]["terminal"] = serde_json::json!([]);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, v.to_string()).unwrap();
    let o = run(&["validate", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("(a)"), "{}", stdout(&o));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ nope").unwrap();
    assert_eq!(run(&["validate", garbage.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["validate", "/no/such/file.json"]).status.code(), Some(2));
}

#[test]
fn replay_of_empty_workspace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["replay", "--workspace", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("0 instances"));
}

#[test]
fn replay_reports_corrupt_log() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("events.ndjson"), "{\"seq\":1").unwrap();
    let o = run(&["replay", "--workspace", dir.path().to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn scenario_then_indicators_csv() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let scenario = repo().join("fixtures/rfq_six.json");
    let o = run(&["run-scenario", scenario.to_str().unwrap(), "--workspace", ws.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o =
        run(&["indicators", "--workspace", ws.to_str().unwrap(), "--as-of", "2024-04-01T00:00:00Z", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!(csv.starts_with("name,family,perspective,value,sample_size,as_of\n"));
    assert!(csv.contains("\nwin_rate,performance,customer,0.5,6,2024-04-01T00:00:00.000Z\n"), "{csv}");

    let o = run(&[
        "indicators",
        "--workspace",
        ws.to_str().unwrap(),
        "--as-of",
        "2024-04-01T00:00:00Z",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["perspectives"].as_array().unwrap().len(), 4);

    let o = run(&["replay", "--workspace", ws.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("6 instances (0 running, 6 completed)"));

    let o = run(&["snapshot", "--workspace", ws.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(ws.join("snapshot.json").exists());
}

#[test]
fn unknown_format_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["indicators", "--workspace", dir.path().to_str().unwrap(), "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("Usage")
            || String::from_utf8_lossy(&o.stderr).contains("possible values")
    );
}

#[test]
fn scenario_failure_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run-scenario", "/no/such.json", "--workspace", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let model = repo().join("models/rfq.json");
    let s = dir.path().join("bad.json");
    std::fs::write(
        &s,
        serde_json::json!([
            {"op": "publish", "args": {"model_file": model}},
            {"op": "instantiate", "at": "2024-01-01T00:00:00Z", "args": {"model": "rfq", "label": "a"}},
            {"op": "perform", "at": "2024-01-01T00:00:00Z",
             "args": {"instance": "a", "activity": "Validation of the offer", "actor": "erin"}}
        ])
        .to_string(),
    )
    .unwrap();
    let o = run(&["run-scenario", s.to_str().unwrap(), "--workspace", dir.path().join("ws").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("WrongState")
            || String::from_utf8_lossy(&o.stderr).contains("needs its entity")
    );
}

#[test]
fn serve_refuses_a_locked_workspace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("LOCK"), "1").unwrap();
    let o = run(&["serve", "--workspace", dir.path().to_str().unwrap(), "--port", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}
