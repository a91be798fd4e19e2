use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Family;
use crate::ids::{EntityId, InstanceId};
use crate::model::ModelRegistry;
use crate::time::Timestamp;
use crate::trace::{EventKind, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: Option<f64>,
    pub sample_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDuration {
    pub mean_ms: Option<f64>,
    pub sample_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drift {
    pub instance: InstanceId,
    pub entity: EntityId,
    pub state: String,
    pub dwell_ms: i64,
}

/// What the log says about one instance as of some point in time.
#[derive(Debug, Clone)]
pub(crate) struct InstanceFacts {
    pub root: EntityId,
    pub completed_at: Option<Timestamp>,
    /// entity -> (state, entered at)
    pub entities: BTreeMap<EntityId, (String, Timestamp)>,
    /// every state entry in log order
    pub entries: Vec<(Timestamp, String)>,
    pub attested: BTreeSet<String>,
}

impl InstanceFacts {
    pub fn is_completed(&self) -> bool {
        self.completed_at.is_some()
    }

    pub fn root_state(&self) -> &str {
        &self.entities[&self.root].0
    }

    pub fn in_population(&self, family: Family) -> bool {
        match family {
            Family::Performance => self.is_completed(),
            Family::Process => true,
        }
    }
}

/// Folds the events of `model`'s instances dated at or before `as_of`.
pub(crate) fn project<'a>(
    events: impl IntoIterator<Item = &'a TraceEvent>,
    model: &str,
    as_of: Timestamp,
) -> BTreeMap<InstanceId, InstanceFacts> {
    let mut out: BTreeMap<InstanceId, InstanceFacts> = BTreeMap::new();
    for e in events.into_iter().filter(|e| e.at <= as_of) {
        if e.kind == EventKind::InstanceStarted {
            if e.payload_str("model") != Some(model) {
                continue;
            }
            let (Some(root), Some(state)) = (e.entity.clone(), e.to_state.clone()) else { continue };
            out.insert(
                e.instance.clone(),
                InstanceFacts {
                    entities: BTreeMap::from([(root.clone(), (state.clone(), e.at))]),
                    root,
                    completed_at: None,
                    entries: vec![(e.at, state)],
                    attested: BTreeSet::new(),
                },
            );
            continue;
        }
        let Some(facts) = out.get_mut(&e.instance) else { continue };
        match e.kind {
            EventKind::StateChanged => {
                if let (Some(entity), Some(to)) = (&e.entity, &e.to_state) {
                    facts.entities.insert(entity.clone(), (to.clone(), e.at));
                    facts.entries.push((e.at, to.clone()));
                }
                if let Some(Value::Object(created)) = e.payload.get("created") {
                    let child = created.get("entity").and_then(Value::as_str);
                    let state = created.get("state").and_then(Value::as_str);
                    if let (Some(child), Some(state)) = (child, state) {
                        facts.entities.insert(EntityId::new(child), (state.to_string(), e.at));
                        facts.entries.push((e.at, state.to_string()));
                    }
                }
            }
            EventKind::InstanceCompleted => facts.completed_at = Some(e.at),
            EventKind::ObjectiveAttested => {
                if let Some(o) = e.payload_str("objective") {
                    facts.attested.insert(o.to_string());
                }
            }
            _ => {}
        }
    }
    out
}

/// Terminal states of the root lifecycle, over every published version of `model`.
pub(crate) fn root_terminal_states(registry: &ModelRegistry, model: &str) -> BTreeSet<String> {
    registry
        .versions(model)
        .filter_map(|m| m.root_type().and_then(|r| m.lifecycle(&r.lifecycle)))
        .flat_map(|lc| lc.terminal().iter().cloned())
        .collect()
}

/// Completed instances per terminal state of the root entity. Every terminal
/// state of the model appears, with zero when nothing reached it.
pub fn count_by_terminal_state(
    registry: &ModelRegistry,
    events: &[TraceEvent],
    model: &str,
    as_of: Timestamp,
) -> BTreeMap<String, u64> {
    counts_from_facts(&project(events, model, as_of), &root_terminal_states(registry, model))
}

pub(crate) fn counts_from_facts(
    facts: &BTreeMap<InstanceId, InstanceFacts>,
    terminal: &BTreeSet<String>,
) -> BTreeMap<String, u64> {
    let mut counts: BTreeMap<String, u64> = terminal.iter().map(|s| (s.clone(), 0)).collect();
    for f in facts.values().filter(|f| f.is_completed()) {
        if let Some(n) = counts.get_mut(f.root_state()) {
            *n += 1;
        }
    }
    counts
}

/// Share of finished instances that ended in `Won`.
pub fn win_rate(registry: &ModelRegistry, events: &[TraceEvent], model: &str, as_of: Timestamp) -> Ratio {
    let counts = count_by_terminal_state(registry, events, model, as_of);
    let total: u64 = counts.values().sum();
    match counts.get("Won") {
        Some(&won) if total > 0 => Ratio { value: Some(won as f64 / total as f64), sample_size: total },
        _ => Ratio { value: None, sample_size: 0 },
    }
}

/// Mean time from the first entry into `from_state` to the next entry into
/// `to_state`, per instance. Performance family averages completed instances
/// only; process family averages every instance with both entries.
pub fn mean_transition_duration(
    events: &[TraceEvent],
    model: &str,
    from_state: &str,
    to_state: &str,
    as_of: Timestamp,
    family: Family,
) -> MeanDuration {
    mean_from_facts(&project(events, model, as_of), from_state, to_state, family)
}

pub(crate) fn mean_from_facts(
    facts: &BTreeMap<InstanceId, InstanceFacts>,
    from_state: &str,
    to_state: &str,
    family: Family,
) -> MeanDuration {
    let mut total: i64 = 0;
    let mut n: u64 = 0;
    for f in facts.values().filter(|f| f.in_population(family)) {
        let Some(start) = f.entries.iter().position(|(_, s)| s == from_state) else { continue };
        let entered = f.entries[start].0;
        if let Some((reached, _)) = f.entries[start + 1..].iter().find(|(_, s)| s == to_state) {
            total += reached.millis_since(entered);
            n += 1;
        }
    }
    if n == 0 {
        MeanDuration { mean_ms: None, sample_size: 0 }
    } else {
        MeanDuration { mean_ms: Some(total as f64 / n as f64), sample_size: n }
    }
}

/// Running instances whose dwell in `state` exceeds `max_dwell_ms`, longest first.
pub fn detect_drift(
    events: &[TraceEvent],
    model: &str,
    state: &str,
    max_dwell_ms: i64,
    as_of: Timestamp,
) -> Vec<Drift> {
    drift_from_facts(&project(events, model, as_of), state, max_dwell_ms, as_of)
}

pub(crate) fn drift_from_facts(
    facts: &BTreeMap<InstanceId, InstanceFacts>,
    state: &str,
    max_dwell_ms: i64,
    as_of: Timestamp,
) -> Vec<Drift> {
    let mut out: Vec<Drift> = facts
        .iter()
        .filter(|(_, f)| !f.is_completed())
        .filter_map(|(id, f)| {
            f.entities
                .iter()
                .filter(|(_, (s, _))| s == state)
                .map(|(entity, (_, since))| (entity, as_of.millis_since(*since)))
                .max_by_key(|(_, dwell)| *dwell)
                .filter(|(_, dwell)| *dwell > max_dwell_ms)
                .map(|(entity, dwell)| Drift {
                    instance: id.clone(),
                    entity: entity.clone(),
                    state: state.to_string(),
                    dwell_ms: dwell,
                })
        })
        .collect();
    out.sort_by(|a, b| b.dwell_ms.cmp(&a.dwell_ms).then_with(|| a.instance.cmp(&b.instance)));
    out
}

pub(crate) fn in_state_from_facts(facts: &BTreeMap<InstanceId, InstanceFacts>, state: &str) -> u64 {
    facts.values().filter(|f| !f.is_completed() && f.entities.values().any(|(s, _)| s == state)).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::MS_PER_HOUR;
    use crate::trace::EventLog;

    fn t(h: i64) -> Timestamp {
        Timestamp::from_millis(h * MS_PER_HOUR)
    }

    /// Minimal hand-written log: two instances enter A then B after 2h and 4h.
    fn two_dwell_log(complete: bool) -> Vec<TraceEvent> {
        let mut log = EventLog::new();
        for (i, dwell) in [(1, 2), (2, 4)] {
            let inst = InstanceId::sequential(i);
            let ent = EntityId::sequential(i);
            log.append(
                TraceEvent::new(EventKind::InstanceStarted, inst.clone(), t(0))
                    .entity(ent.clone())
                    .states(None, "A")
                    .with("model", "m"),
            )
            .unwrap();
            log.append(
                TraceEvent::new(EventKind::StateChanged, inst.clone(), t(dwell))
                    .entity(ent)
                    .activity("go")
                    .actor("x")
                    .states(Some("A"), "B"),
            )
            .unwrap();
            if complete {
                log.append(TraceEvent::new(EventKind::InstanceCompleted, inst, t(dwell))).unwrap();
            }
        }
        log.events().to_vec()
    }

    #[test]
    fn mean_of_two_and_four_hours_is_three() {
        let events = two_dwell_log(true);
        let m = mean_transition_duration(&events, "m", "A", "B", t(10), Family::Performance);
        assert_eq!(m, MeanDuration { mean_ms: Some((3 * MS_PER_HOUR) as f64), sample_size: 2 });
    }

    #[test]
    fn mean_undefined_without_target() {
        let events = two_dwell_log(true);
        let m = mean_transition_duration(&events, "m", "A", "Z", t(10), Family::Performance);
        assert_eq!(m, MeanDuration { mean_ms: None, sample_size: 0 });
    }

    #[test]
    fn performance_mean_ignores_running_instances() {
        let events = two_dwell_log(false);
        let perf = mean_transition_duration(&events, "m", "A", "B", t(10), Family::Performance);
        assert_eq!(perf.sample_size, 0);
        let proc_ = mean_transition_duration(&events, "m", "A", "B", t(10), Family::Process);
        assert_eq!(proc_.sample_size, 2);
    }

    #[test]
    fn as_of_cuts_the_log() {
        let events = two_dwell_log(true);
        let m = mean_transition_duration(&events, "m", "A", "B", t(3), Family::Performance);
        assert_eq!(m.sample_size, 1);
    }

    #[test]
    fn drift_lists_overdue_instances_longest_first() {
        let events = two_dwell_log(false);
        // both sit in B; instance 1 since 2h, instance 2 since 4h
        let d = detect_drift(&events, "m", "B", 5 * MS_PER_HOUR, t(10));
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].instance, InstanceId::sequential(1));
        assert_eq!(d[0].dwell_ms, 8 * MS_PER_HOUR);
        let d = detect_drift(&events, "m", "B", 7 * MS_PER_HOUR, t(10));
        assert_eq!(d.len(), 1);
        assert!(detect_drift(&two_dwell_log(true), "m", "B", 0, t(10)).is_empty());
    }

    #[test]
    fn exceeding_is_strict() {
        let events = two_dwell_log(false);
        let d = detect_drift(&events, "m", "B", 6 * MS_PER_HOUR, t(10));
        assert_eq!(d.len(), 1, "dwell of exactly 6h does not exceed 6h");
    }
}
