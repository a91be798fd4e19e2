// Indicator operations against the independent linear-scan oracle.

use std::path::{Path, PathBuf};

use plmflow::indicators::{count_by_terminal_state, detect_drift, mean_transition_duration, win_rate, Family};
use plmflow::scenario::run_scenario;
use plmflow::store::Workspace;
use plmflow::trace::{EventFilter, EventKind};
use plmflow::Timestamp;
use plmflow_oracle as oracle;
use proptest::prelude::*;

const TERMINAL: [&str; 3] = ["Won", "Lost", "Declined"];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load(scenario: &str) -> (tempfile::TempDir, Workspace, Vec<serde_json::Value>) {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&fixtures().join(scenario), dir.path()).unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    let raw = oracle::parse_log(&std::fs::read_to_string(dir.path().join("events.ndjson")).unwrap());
    (dir, ws, raw)
}

fn compare(ws: &Workspace, raw: &[serde_json::Value], as_of: Timestamp) {
    let e = ws.engine();
    let ms = as_of.as_millis();
    let counts = count_by_terminal_state(e.registry(), e.events(), "rfq", as_of);
    let expected = oracle::terminal_counts(raw, "rfq", &TERMINAL, ms);
    assert_eq!(counts, expected, "counts at {as_of}");
    assert_eq!(
        win_rate(e.registry(), e.events(), "rfq", as_of).value,
        oracle::win_rate(raw, "rfq", &TERMINAL, "Won", ms)
    );
    for (family, completed_only) in [(Family::Performance, true), (Family::Process, false)] {
        let m = mean_transition_duration(e.events(), "rfq", "Registered", "UnderAnalysis", as_of, family);
        assert_eq!(
            (m.mean_ms, m.sample_size),
            oracle::mean_duration(raw, "rfq", "Registered", "UnderAnalysis", ms, completed_only)
        );
    }
    for max in [0, 3_600_000, 604_800_000] {
        let d: Vec<(String, i64)> = detect_drift(e.events(), "rfq", "UnderAnalysis", max, as_of)
            .into_iter()
            .map(|d| (d.instance.to_string(), d.dwell_ms))
            .collect();
        assert_eq!(d, oracle::drift(raw, "rfq", "UnderAnalysis", max, ms));
    }
    let v = |name: &str| e.evaluate_indicator(name, as_of).unwrap();
    assert_eq!(v("completed_count").value.numeric(), Some(oracle::completed_count(raw, "rfq", ms) as f64));
    assert_eq!(
        v("rfqs_under_analysis").value.numeric(),
        Some(oracle::in_state_count(raw, "rfq", "UnderAnalysis", ms) as f64)
    );
    assert_eq!(
        v("attested_reviews").value.numeric(),
        Some(oracle::attested_count(raw, "rfq", "offer_compliance_review", ms) as f64)
    );
}

#[test]
fn six_fixture_headline_numbers() {
    let (_d, ws, raw) = load("rfq_six.json");
    let as_of = Timestamp::parse("2024-04-01T00:00:00Z").unwrap();
    let e = ws.engine();
    let counts = count_by_terminal_state(e.registry(), e.events(), "rfq", as_of);
    assert_eq!(counts.get("Won"), Some(&3));
    assert_eq!(counts.get("Lost"), Some(&2));
    assert_eq!(counts.get("Declined"), Some(&1));
    let rate = win_rate(e.registry(), e.events(), "rfq", as_of);
    assert_eq!(rate.value, Some(0.5));
    assert_eq!(rate.sample_size, 6);
    let m = mean_transition_duration(e.events(), "rfq", "Registered", "UnderAnalysis", as_of, Family::Performance);
    assert_eq!(m.mean_ms, Some(122_400_000.0));
    compare(&ws, &raw, as_of);
}

#[test]
fn drift_fixture_matches_oracle() {
    let (_d, ws, raw) = load("rfq_drift.json");
    let as_of = Timestamp::parse("2024-05-20T00:00:00Z").unwrap();
    compare(&ws, &raw, as_of);
    let drift = detect_drift(ws.engine().events(), "rfq", "UnderAnalysis", 604_800_000, as_of);
    assert_eq!(drift.len(), 3);
}

#[test]
fn kind_query_matches_oracle() {
    let (_d, ws, raw) = load("rfq_six.json");
    for kind in [EventKind::StateChanged, EventKind::InstanceCompleted, EventKind::ObjectiveAttested] {
        let seqs: Vec<u64> =
            ws.engine().query(&EventFilter { kind: Some(kind), ..Default::default() }).iter().map(|e| e.seq).collect();
        assert_eq!(seqs, oracle::seqs_of_kind(&raw, kind.as_str()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Every cut-off date gives the same answers as the oracle.
    #[test]
    fn any_as_of_agrees(offset_min in 0i64..(30 * 24 * 60)) {
        thread_local! {
            static SIX: (tempfile::TempDir, Workspace, Vec<serde_json::Value>) = load("rfq_six.json");
        }
        let as_of = Timestamp::parse("2024-03-04T00:00:00Z").unwrap().plus_millis(offset_min * 60_000);
        SIX.with(|(_, ws, raw)| compare(ws, raw, as_of));
    }
}
