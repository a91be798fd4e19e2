//! Append-only trace of everything the engine does.
//!
//! Each [`TraceEvent`] records one state change or lifecycle bookend. The log
//! assigns a global, gapless sequence number and refuses per-instance
//! timestamp regressions. On disk the log is newline-delimited JSON, one
//! event per line, with every field present (absent values as `null`).

mod replay;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::{EntityId, InstanceId};
use crate::time::Timestamp;

pub use replay::{replay, replay_onto};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    InstanceStarted,
    StateChanged,
    InstanceCompleted,
    ObjectiveAttested,
    ObjectiveEvaluated,
    InstanceMigrated,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::InstanceStarted => "instance_started",
            EventKind::StateChanged => "state_changed",
            EventKind::InstanceCompleted => "instance_completed",
            EventKind::ObjectiveAttested => "objective_attested",
            EventKind::ObjectiveEvaluated => "objective_evaluated",
            EventKind::InstanceMigrated => "instance_migrated",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown event kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub seq: u64,
    pub at: Timestamp,
    pub kind: EventKind,
    pub instance: InstanceId,
    pub entity: Option<EntityId>,
    pub activity: Option<String>,
    pub actor: Option<String>,
    pub from_state: Option<String>,
    pub to_state: Option<String>,
    pub payload: BTreeMap<String, Value>,
}

impl TraceEvent {
    /// Unsequenced event; the log assigns `seq` on append.
    pub fn new(kind: EventKind, instance: InstanceId, at: Timestamp) -> Self {
        TraceEvent {
            seq: 0,
            at,
            kind,
            instance,
            entity: None,
            activity: None,
            actor: None,
            from_state: None,
            to_state: None,
            payload: BTreeMap::new(),
        }
    }

    pub fn entity(mut self, entity: EntityId) -> Self {
        self.entity = Some(entity);
        self
    }

    pub fn activity(mut self, activity: impl Into<String>) -> Self {
        self.activity = Some(activity.into());
        self
    }

    pub fn actor(mut self, actor: impl Into<String>) -> Self {
        self.actor = Some(actor.into());
        self
    }

    pub fn states(mut self, from: Option<&str>, to: &str) -> Self {
        self.from_state = from.map(str::to_string);
        self.to_state = Some(to.to_string());
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    pub fn payload_str(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    /// One NDJSON line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("timestamp {at} precedes the last event {last} of instance {instance}")]
    ClockSkew { instance: InstanceId, last: Timestamp, at: Timestamp },
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("corrupt log{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    CorruptLog { line: Option<usize>, seq: Option<u64>, reason: String },
}

impl TraceError {
    pub(crate) fn corrupt_seq(seq: u64, reason: impl Into<String>) -> Self {
        TraceError::CorruptLog { line: Some(seq as usize), seq: Some(seq), reason: reason.into() }
    }
}

/// Receives events before they become visible in memory. Returning an error
/// aborts the append; implementations must leave storage unchanged on error.
pub trait EventSink: Send + Sync {
    fn persist(&mut self, events: &[TraceEvent]) -> std::io::Result<()>;
}

/// Query filter; every field present narrows the result. `from`/`to` bound
/// the event timestamp inclusively.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventFilter {
    pub instance: Option<InstanceId>,
    pub entity: Option<EntityId>,
    pub kind: Option<EventKind>,
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
    pub actor: Option<String>,
}

impl EventFilter {
    pub fn matches(&self, e: &TraceEvent) -> bool {
        self.instance.as_ref().is_none_or(|i| &e.instance == i)
            && self.entity.as_ref().is_none_or(|x| e.entity.as_ref() == Some(x))
            && self.kind.is_none_or(|k| e.kind == k)
            && self.from.is_none_or(|t| e.at >= t)
            && self.to.is_none_or(|t| e.at <= t)
            && self.actor.as_ref().is_none_or(|a| e.actor.as_ref() == Some(a))
    }
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<TraceEvent>,
    last_at: HashMap<InstanceId, Timestamp>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a log from already-sequenced events, checking seq continuity
    /// and per-instance clocks.
    pub fn from_events(events: Vec<TraceEvent>) -> Result<Self, TraceError> {
        let mut log = EventLog::new();
        for e in events {
            let expected = log.next_seq();
            if e.seq != expected {
                return Err(TraceError::corrupt_seq(expected, format!("expected seq {expected}, found {}", e.seq)));
            }
            log.check_clock(&e.instance, e.at).map_err(|err| TraceError::corrupt_seq(e.seq, err.to_string()))?;
            log.push(e);
        }
        Ok(log)
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }

    fn next_seq(&self) -> u64 {
        self.last_seq() + 1
    }

    pub fn last_at(&self, instance: &InstanceId) -> Option<Timestamp> {
        self.last_at.get(instance).copied()
    }

    fn check_clock(&self, instance: &InstanceId, at: Timestamp) -> Result<(), TraceError> {
        match self.last_at(instance) {
            Some(last) if at < last => Err(TraceError::ClockSkew { instance: instance.clone(), last, at }),
            _ => Ok(()),
        }
    }

    /// Assigns sequence numbers to a batch without committing it.
    pub fn stage(&self, events: Vec<TraceEvent>) -> Result<Vec<TraceEvent>, TraceError> {
        let mut latest: HashMap<InstanceId, Timestamp> = HashMap::new();
        let mut out = Vec::with_capacity(events.len());
        for (seq, mut e) in (self.next_seq()..).zip(events) {
            let last = latest.get(&e.instance).copied().or_else(|| self.last_at(&e.instance));
            if let Some(last) = last {
                if e.at < last {
                    return Err(TraceError::ClockSkew { instance: e.instance.clone(), last, at: e.at });
                }
            }
            e.seq = seq;
            latest.insert(e.instance.clone(), e.at);
            out.push(e);
        }
        Ok(out)
    }

    /// Commits a staged batch. The batch must come from [`EventLog::stage`]
    /// on this log with no intervening commit.
    pub fn commit(&mut self, staged: Vec<TraceEvent>) {
        for e in staged {
            debug_assert_eq!(e.seq, self.next_seq());
            self.push(e);
        }
    }

    fn push(&mut self, e: TraceEvent) {
        self.last_at.insert(e.instance.clone(), e.at);
        self.events.push(e);
    }

    /// Appends a single event and returns its sequence number.
    pub fn append(&mut self, event: TraceEvent) -> Result<u64, TraceError> {
        let staged = self.stage(vec![event])?;
        let seq = staged[0].seq;
        self.commit(staged);
        Ok(seq)
    }

    pub fn query(&self, filter: &EventFilter) -> Vec<&TraceEvent> {
        self.events.iter().filter(|e| filter.matches(e)).collect()
    }

    pub fn to_ndjson(&self) -> String {
        encode_ndjson(&self.events)
    }
}

pub fn encode_ndjson(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

/// Parses NDJSON log text. A final line missing its newline is reported as
/// torn, naming its 1-based line number.
pub fn parse_ndjson(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    let line_count = text.lines().count();
    for (idx, line) in text.lines().enumerate() {
        let number = idx + 1;
        if line.trim().is_empty() {
            return Err(TraceError::CorruptLog { line: Some(number), seq: None, reason: "blank line".into() });
        }
        let event: TraceEvent = serde_json::from_str(line).map_err(|e| TraceError::CorruptLog {
            line: Some(number),
            seq: None,
            reason: format!("unparseable event: {e}"),
        })?;
        if number == line_count && !text.ends_with('\n') {
            return Err(TraceError::CorruptLog {
                line: Some(number),
                seq: Some(event.seq),
                reason: "torn final line (missing newline)".into(),
            });
        }
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ms: i64) -> Timestamp {
        Timestamp::from_millis(ms)
    }

    fn started(instance: &str, at: i64) -> TraceEvent {
        TraceEvent::new(EventKind::InstanceStarted, InstanceId::new(instance), t(at))
    }

    #[test]
    fn append_assigns_gapless_seq() {
        let mut log = EventLog::new();
        assert_eq!(log.append(started("I-1", 10)).unwrap(), 1);
        assert_eq!(log.append(started("I-2", 5)).unwrap(), 2);
        assert_eq!(log.last_seq(), 2);
    }

    #[test]
    fn append_rejects_instance_clock_regression() {
        let mut log = EventLog::new();
        log.append(started("I-1", 10)).unwrap();
        let err = log.append(started("I-1", 9)).unwrap_err();
        assert!(matches!(err, TraceError::ClockSkew { .. }));
        assert_eq!(log.len(), 1);
        // equal timestamps are fine
        log.append(started("I-1", 10)).unwrap();
    }

    #[test]
    fn stage_checks_clock_within_batch() {
        let log = EventLog::new();
        let err = log.stage(vec![started("I-1", 10), started("I-1", 3)]).unwrap_err();
        assert!(matches!(err, TraceError::ClockSkew { .. }));
    }

    #[test]
    fn query_empty_log_and_disjoint_range() {
        let mut log = EventLog::new();
        assert!(log.query(&EventFilter::default()).is_empty());
        log.append(started("I-1", 10)).unwrap();
        let filter = EventFilter { from: Some(t(100)), to: Some(t(200)), ..Default::default() };
        assert!(log.query(&filter).is_empty());
        assert_eq!(log.query(&EventFilter::default()).len(), 1);
    }

    #[test]
    fn line_has_every_field() {
        let e = TraceEvent { seq: 1, ..started("I-000001", 0) };
        assert_eq!(
            e.to_line(),
            r#"{"seq":1,"at":"1970-01-01T00:00:00.000Z","kind":"instance_started","instance":"I-000001","entity":null,"activity":null,"actor":null,"from_state":null,"to_state":null,"payload":{}}"#
        );
    }

    #[test]
    fn torn_line_is_reported_with_number() {
        let mut log = EventLog::new();
        log.append(started("I-1", 1)).unwrap();
        log.append(started("I-2", 2)).unwrap();
        let text = log.to_ndjson();
        assert_eq!(parse_ndjson(&text).unwrap().len(), 2);

        let cut = &text[..text.len() - 10];
        match parse_ndjson(cut).unwrap_err() {
            TraceError::CorruptLog { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
        let no_newline = &text[..text.len() - 1];
        assert!(matches!(parse_ndjson(no_newline), Err(TraceError::CorruptLog { line: Some(2), .. })));
    }

    #[test]
    fn from_events_detects_gaps() {
        let mut a = started("I-1", 1);
        a.seq = 1;
        let mut b = started("I-1", 2);
        b.seq = 3;
        assert!(matches!(EventLog::from_events(vec![a, b]), Err(TraceError::CorruptLog { .. })));
    }

    #[test]
    fn unknown_fields_rejected() {
        let line = r#"{"seq":1,"at":"1970-01-01T00:00:00.000Z","kind":"instance_started","instance":"I","entity":null,"activity":null,"actor":null,"from_state":null,"to_state":null,"payload":{},"extra":1}"#;
        assert!(serde_json::from_str::<TraceEvent>(line).is_err());
    }
}
