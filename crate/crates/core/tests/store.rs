use std::fs;
use std::path::{Path, PathBuf};

use plmflow::scenario::run_scenario;
use plmflow::store::{StoreError, Workspace, LOG_FILE, SNAPSHOT_FILE};
use plmflow::trace::{parse_ndjson, replay};
use plmflow::Timestamp;
use serde_json::json;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&fixtures().join("rfq_six.json"), dir.path()).unwrap();
    dir
}

#[test]
fn fixture_workspace_state_equals_replay_of_shipped_log() {
    let dir = fixture_workspace();
    let ws = Workspace::open(dir.path()).unwrap();
    let shipped = parse_ndjson(&fs::read_to_string(fixtures().join("rfq_six.events.ndjson")).unwrap()).unwrap();
    let expected = replay(ws.engine().registry(), &shipped).unwrap();
    assert_eq!(ws.engine().state(), &expected);
    assert_eq!(ws.engine().events(), &shipped[..]);
}

#[test]
fn truncated_last_line_names_its_line_number() {
    let dir = fixture_workspace();
    let path = dir.path().join(LOG_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let lines = text.lines().count();
    fs::write(&path, &text[..text.len() - 20]).unwrap();
    match Workspace::open(dir.path()).unwrap_err() {
        StoreError::CorruptLog { line, .. } => assert_eq!(line, lines),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn corrupt_line_in_the_middle() {
    let dir = fixture_workspace();
    let path = dir.path().join(LOG_FILE);
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    lines[4] = "{not json".into();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(matches!(Workspace::open(dir.path()), Err(StoreError::CorruptLog { line: 5, .. })));
}

#[test]
fn illegal_transition_in_log_is_corrupt() {
    let dir = fixture_workspace();
    let path = dir.path().join(LOG_FILE);
    let text = fs::read_to_string(&path).unwrap().replacen("\"to_state\":\"Registered\"", "\"to_state\":\"Won\"", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(Workspace::open(dir.path()), Err(StoreError::CorruptLog { line: 2, .. })));
}

#[test]
fn invalid_model_file_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("models")).unwrap();
    let mut model: serde_json::Value = serde_json::from_str(plmflow::case_study::RFQ_MODEL_JSON).unwrap();
    model["typology"]["measurability"] = json!("not_measurable");
    fs::write(dir.path().join("models/rfq-v1.json"), model.to_string()).unwrap();
    assert!(matches!(Workspace::open(dir.path()), Err(StoreError::ValidationFailed { .. })));
    fs::write(dir.path().join("models/rfq-v1.json"), "{").unwrap();
    assert!(matches!(Workspace::open(dir.path()), Err(StoreError::Parse { .. })));
}

#[test]
fn snapshot_round_trip_without_new_events() {
    let dir = fixture_workspace();
    let full = Workspace::open(dir.path()).unwrap().engine().state().clone();
    Workspace::open_writer(dir.path()).unwrap().snapshot().unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    assert_eq!(ws.load_snapshot().unwrap().as_ref(), Some(&full));
    assert_eq!(ws.engine().state(), &full);
}

#[test]
fn snapshot_plus_tail_equals_full_replay() {
    let dir = fixture_workspace();
    let snap_seq;
    {
        let mut ws = Workspace::open_writer(dir.path()).unwrap();
        ws.snapshot().unwrap();
        snap_seq = ws.engine().state().last_seq;
        let engine = ws.engine_mut().unwrap();
        let at = Timestamp::parse("2024-04-02T00:00:00Z").unwrap();
        for n in 0..2 {
            let a = serde_json::from_value(json!({"rfq_number": format!("T{n}"), "customer": "x"})).unwrap();
            engine.instantiate("rfq", None, a, None, at).unwrap();
        }
        let id = plmflow::InstanceId::sequential(7);
        let alice = engine.actor("alice");
        let p = serde_json::from_value(json!({"part_number": "P", "quantity": 1})).unwrap();
        engine.perform_activity(&id, plmflow::case_study::REGISTRATION, &alice, p, at).unwrap();
        let erin = engine.actor("erin");
        engine.attest_objective("offer_compliance_review", &id, &erin, at).unwrap();
        engine.evaluate_objective("win_rate_target", &id, at).unwrap();
        assert_eq!(engine.state().last_seq, snap_seq + 5);
    }
    let with_snapshot = Workspace::open(dir.path()).unwrap();
    fs::remove_file(dir.path().join(SNAPSHOT_FILE)).unwrap();
    let full = Workspace::open(dir.path()).unwrap();
    assert_eq!(with_snapshot.engine().state(), full.engine().state());
    let events = full.engine().events();
    assert_eq!(replay(full.engine().registry(), events).unwrap(), *full.engine().state());
}

#[test]
fn writer_persists_every_event_before_it_is_visible() {
    let dir = fixture_workspace();
    let ws = Workspace::open(dir.path()).unwrap();
    let on_disk = fs::read_to_string(dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(on_disk, plmflow::trace::encode_ndjson(ws.engine().events()));
}

#[test]
fn published_models_and_packs_are_written() {
    let dir = fixture_workspace();
    assert!(dir.path().join("models/rfq-v1.json").exists());
    assert!(dir.path().join("indicators/rfq_default.json").exists());
    assert!(!dir.path().join("LOCK").exists());
}
