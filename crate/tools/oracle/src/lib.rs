//! Reference computations over a raw NDJSON event log.
//!
//! Everything here is a plain linear scan over `serde_json::Value`s. None of
//! the engine's types or projections are used, so results can be compared
//! against the engine's indicators.

use std::collections::BTreeMap;

use chrono::DateTime;
use serde_json::Value;

pub fn parse_log(text: &str) -> Vec<Value> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("oracle input must be valid NDJSON"))
        .collect()
}

pub fn millis(rfc3339: &str) -> i64 {
    DateTime::parse_from_rfc3339(rfc3339).expect("timestamp").timestamp_millis()
}

fn at(e: &Value) -> i64 {
    millis(e["at"].as_str().expect("at"))
}

fn s<'a>(e: &'a Value, key: &str) -> Option<&'a str> {
    e[key].as_str()
}

/// Instance ids started on `model` at or before `as_of`, in log order.
fn instances_of(events: &[Value], model: &str, as_of: i64) -> Vec<String> {
    let mut out = Vec::new();
    for e in events {
        if s(e, "kind") == Some("instance_started") && e["payload"]["model"] == model && at(e) <= as_of {
            out.push(s(e, "instance").unwrap().to_string());
        }
    }
    out
}

fn events_of<'a>(events: &'a [Value], instance: &str, as_of: i64) -> Vec<&'a Value> {
    events.iter().filter(|e| s(e, "instance") == Some(instance) && at(e) <= as_of).collect()
}

fn is_completed(evs: &[&Value]) -> bool {
    evs.iter().any(|e| s(e, "kind") == Some("instance_completed"))
}

/// Final state of the root entity (the one named by `instance_started`).
fn root_state(evs: &[&Value]) -> String {
    let start = evs.iter().find(|e| s(e, "kind") == Some("instance_started")).unwrap();
    let root = s(start, "entity").unwrap();
    let mut state = s(start, "to_state").unwrap().to_string();
    for e in evs {
        if s(e, "kind") == Some("state_changed") && s(e, "entity") == Some(root) {
            state = s(e, "to_state").unwrap().to_string();
        }
    }
    state
}

/// Every (time, state) entry of any entity of the instance, in log order.
fn entries(evs: &[&Value]) -> Vec<(i64, String)> {
    let mut out = Vec::new();
    for e in evs {
        match s(e, "kind") {
            Some("instance_started") | Some("state_changed") => {
                out.push((at(e), s(e, "to_state").unwrap().to_string()));
                if let Some(st) = e["payload"]["created"]["state"].as_str() {
                    out.push((at(e), st.to_string()));
                }
            }
            _ => {}
        }
    }
    out
}

/// Completed instances per final root state, restricted to `terminal`.
pub fn terminal_counts(events: &[Value], model: &str, terminal: &[&str], as_of: i64) -> BTreeMap<String, u64> {
    let mut counts: BTreeMap<String, u64> = terminal.iter().map(|t| (t.to_string(), 0)).collect();
    for id in instances_of(events, model, as_of) {
        let evs = events_of(events, &id, as_of);
        if !is_completed(&evs) {
            continue;
        }
        if let Some(n) = counts.get_mut(&root_state(&evs)) {
            *n += 1;
        }
    }
    counts
}

pub fn completed_count(events: &[Value], model: &str, as_of: i64) -> u64 {
    instances_of(events, model, as_of).iter().filter(|id| is_completed(&events_of(events, id, as_of))).count() as u64
}

/// `won / total terminal`, or None when nothing finished.
pub fn win_rate(events: &[Value], model: &str, terminal: &[&str], won: &str, as_of: i64) -> Option<f64> {
    let counts = terminal_counts(events, model, terminal, as_of);
    let total: u64 = counts.values().sum();
    if total == 0 {
        None
    } else {
        Some(counts[won] as f64 / total as f64)
    }
}

/// Mean ms from first entry into `from` to the next entry into `to`, with
/// the number of instances that contributed.
pub fn mean_duration(
    events: &[Value],
    model: &str,
    from: &str,
    to: &str,
    as_of: i64,
    completed_only: bool,
) -> (Option<f64>, u64) {
    let mut sum = 0i64;
    let mut n = 0u64;
    for id in instances_of(events, model, as_of) {
        let evs = events_of(events, &id, as_of);
        if completed_only && !is_completed(&evs) {
            continue;
        }
        let ent = entries(&evs);
        let mut entered = None;
        for (t, st) in &ent {
            match entered {
                None if st == from => entered = Some(*t),
                Some(start) if st == to => {
                    sum += t - start;
                    n += 1;
                    break;
                }
                _ => {}
            }
        }
    }
    if n == 0 {
        (None, 0)
    } else {
        (Some(sum as f64 / n as f64), n)
    }
}

/// Current state and entry time of each entity of one instance.
fn entity_states(evs: &[&Value]) -> BTreeMap<String, (String, i64)> {
    let mut out = BTreeMap::new();
    for e in evs {
        if matches!(s(e, "kind"), Some("instance_started") | Some("state_changed")) {
            out.insert(s(e, "entity").unwrap().to_string(), (s(e, "to_state").unwrap().to_string(), at(e)));
            if let (Some(c), Some(st)) =
                (e["payload"]["created"]["entity"].as_str(), e["payload"]["created"]["state"].as_str())
            {
                out.insert(c.to_string(), (st.to_string(), at(e)));
            }
        }
    }
    out
}

/// Running instances sitting in `state` for more than `max_dwell` ms, as
/// `(instance, dwell)` sorted by dwell descending then instance id.
pub fn drift(events: &[Value], model: &str, state: &str, max_dwell: i64, as_of: i64) -> Vec<(String, i64)> {
    let mut out = Vec::new();
    for id in instances_of(events, model, as_of) {
        let evs = events_of(events, &id, as_of);
        if is_completed(&evs) {
            continue;
        }
        let longest = entity_states(&evs).values().filter(|(st, _)| st == state).map(|(_, since)| as_of - since).max();
        if let Some(d) = longest.filter(|d| *d > max_dwell) {
            out.push((id, d));
        }
    }
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Running instances with some entity currently in `state`.
pub fn in_state_count(events: &[Value], model: &str, state: &str, as_of: i64) -> u64 {
    instances_of(events, model, as_of)
        .iter()
        .filter(|id| {
            let evs = events_of(events, id, as_of);
            !is_completed(&evs) && entity_states(&evs).values().any(|(st, _)| st == state)
        })
        .count() as u64
}

/// Completed instances that carry an attestation of `objective`.
pub fn attested_count(events: &[Value], model: &str, objective: &str, as_of: i64) -> u64 {
    instances_of(events, model, as_of)
        .iter()
        .filter(|id| {
            let evs = events_of(events, id, as_of);
            is_completed(&evs)
                && evs
                    .iter()
                    .any(|e| s(e, "kind") == Some("objective_attested") && e["payload"]["objective"] == objective)
        })
        .count() as u64
}

/// Sequence numbers of events of one kind.
pub fn seqs_of_kind(events: &[Value], kind: &str) -> Vec<u64> {
    events.iter().filter(|e| s(e, "kind") == Some(kind)).map(|e| e["seq"].as_u64().unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG: &str = concat!(
        r#"{"seq":1,"at":"2024-01-01T00:00:00.000Z","kind":"instance_started","instance":"I-1","entity":"E-1","activity":null,"actor":null,"from_state":null,"to_state":"A","payload":{"model":"m"}}"#,
        "\n",
        r#"{"seq":2,"at":"2024-01-01T02:00:00.000Z","kind":"state_changed","instance":"I-1","entity":"E-1","activity":"go","actor":"x","from_state":"A","to_state":"Won","payload":{}}"#,
        "\n",
        r#"{"seq":3,"at":"2024-01-01T02:00:00.000Z","kind":"instance_completed","instance":"I-1","entity":null,"activity":null,"actor":null,"from_state":null,"to_state":null,"payload":{}}"#,
        "\n",
    );

    #[test]
    fn scans_a_tiny_log() {
        let ev = parse_log(LOG);
        let end = millis("2025-01-01T00:00:00Z");
        assert_eq!(terminal_counts(&ev, "m", &["Won", "Lost"], end)["Won"], 1);
        assert_eq!(win_rate(&ev, "m", &["Won", "Lost"], "Won", end), Some(1.0));
        assert_eq!(mean_duration(&ev, "m", "A", "Won", end, true), (Some(7_200_000.0), 1));
        assert_eq!(seqs_of_kind(&ev, "state_changed"), vec![2]);
        assert!(drift(&ev, "m", "A", 0, end).is_empty());
    }
}
