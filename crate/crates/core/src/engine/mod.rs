//! Process execution.
//!
//! The engine is event-sourced: every operation validates its preconditions
//! against the current [`EngineState`], emits trace events, hands them to the
//! optional [`EventSink`] and only then applies them. A failed operation
//! leaves both the log and the state untouched.

mod error;
mod state;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use error::EngineError;
pub use state::{
    Attestation, Attributes, CreatedEntity, EngineState, EntityInstance, InstanceStatus, ObjectivePoint,
    ObjectiveStatus, ProcessInstance,
};

use crate::ids::{EntityId, InstanceId};
use crate::indicators::{
    detect_drift, evaluate_indicator, scorecard_report, Drift, EventView, IndicatorDef, IndicatorSet, IndicatorSpec,
    IndicatorValue, Scorecard,
};
use crate::model::{
    validate_process_model, Actor, Genericity, ModelRef, ModelRegistry, Objective, ObjectiveKind, ProcessModel,
    Stability, TimeAxis, TransitionTarget, OUTCOME_PARAMETER,
};
use crate::time::Timestamp;
use crate::trace::{EventFilter, EventKind, EventLog, EventSink, TraceError, TraceEvent};

/// An activity an actor can perform right now.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItem {
    pub instance: InstanceId,
    pub activity: String,
    pub entity: EntityId,
    pub enabled_since: Timestamp,
}

/// A process instance together with its entities and objective statuses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceView {
    pub instance: ProcessInstance,
    pub entities: Vec<EntityInstance>,
    pub objectives: Vec<ObjectiveStatus>,
    pub migratable: bool,
}

/// Overdue instances for one `overdue_count` indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub indicator: String,
    pub model: String,
    pub state: String,
    pub max_dwell_ms: i64,
    pub items: Vec<Drift>,
}

pub struct Engine {
    registry: ModelRegistry,
    indicators: IndicatorSet,
    log: EventLog,
    state: EngineState,
    sink: Option<Box<dyn EventSink>>,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new()
    }
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("models", &self.registry.iter().count())
            .field("indicators", &self.indicators.defs().len())
            .field("events", &self.log.len())
            .field("durable", &self.sink.is_some())
            .finish()
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine {
            registry: ModelRegistry::new(),
            indicators: IndicatorSet::default(),
            log: EventLog::new(),
            state: EngineState::default(),
            sink: None,
        }
    }

    /// Rebuilds an engine from published models and an existing log.
    pub fn restore(
        registry: ModelRegistry,
        indicators: IndicatorSet,
        events: Vec<TraceEvent>,
    ) -> Result<Self, TraceError> {
        let state = crate::trace::replay(&registry, &events)?;
        let log = EventLog::from_events(events)?;
        Ok(Engine { registry, indicators, log, state, sink: None })
    }

    /// Like [`Engine::restore`] but starts from a state already covering
    /// the first `state.last_seq` events and replays only the rest.
    pub fn restore_from(
        registry: ModelRegistry,
        indicators: IndicatorSet,
        events: Vec<TraceEvent>,
        state: EngineState,
    ) -> Result<Self, TraceError> {
        let skip = (state.last_seq as usize).min(events.len());
        let state = crate::trace::replay_onto(state, &registry, &events[skip..])?;
        let log = EventLog::from_events(events)?;
        Ok(Engine { registry, indicators, log, state, sink: None })
    }

    pub fn set_sink(&mut self, sink: Box<dyn EventSink>) {
        self.sink = Some(sink);
    }

    pub fn registry(&self) -> &ModelRegistry {
        &self.registry
    }

    pub fn indicators(&self) -> &IndicatorSet {
        &self.indicators
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn events(&self) -> &[TraceEvent] {
        self.log.events()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn query(&self, filter: &EventFilter) -> Vec<&TraceEvent> {
        self.log.query(filter)
    }

    /// Actor from the role directory of the published models; unknown ids
    /// yield an actor without roles.
    pub fn actor(&self, id: &str) -> Actor {
        self.registry.actor(id).unwrap_or_else(|| Actor::new(id))
    }

    pub fn install_indicators(&mut self, defs: Vec<IndicatorDef>) -> Result<(), EngineError> {
        self.indicators = self.indicators.merged(defs)?;
        Ok(())
    }

    /// Registers a validated model without version-governance checks, as
    /// when loading a workspace.
    pub fn load_model(&mut self, model: ProcessModel) -> Result<ModelRef, EngineError> {
        let violations = validate_process_model(&model);
        if !violations.is_empty() {
            return Err(EngineError::ValidationFailed(violations));
        }
        self.registry.insert(model).map_err(|c| EngineError::VersionExists {
            name: c.name,
            version: c.version,
            latest: c.latest,
        })
    }

    /// Publishes a new model version under the stability rule of the
    /// currently published version.
    pub fn publish_model(&mut self, model: ProcessModel) -> Result<ModelRef, EngineError> {
        let violations = validate_process_model(&model);
        if !violations.is_empty() {
            return Err(EngineError::ValidationFailed(violations));
        }
        if let Some(current) = self.registry.latest(&model.name) {
            if model.version <= current.version {
                return Err(EngineError::VersionExists {
                    name: model.name,
                    version: model.version,
                    latest: current.version,
                });
            }
            let current_ref = current.reference();
            let live = self.state.instances.values().any(|i| i.is_running() && i.model == current_ref);
            if current.typology.stability == Stability::Stable && live {
                return Err(EngineError::FrozenModel(model.name));
            }
        }
        self.load_model(model)
    }

    pub fn instance(&self, id: &InstanceId) -> Result<&ProcessInstance, EngineError> {
        self.state.instance(id).ok_or_else(|| EngineError::UnknownInstance(id.clone()))
    }

    pub fn instance_view(&self, id: &InstanceId) -> Result<InstanceView, EngineError> {
        let instance = self.instance(id)?.clone();
        let entities = self.state.entities.values().filter(|e| &e.instance == id).cloned().collect();
        let objectives = self.state.objectives.get(id).map(|m| m.values().cloned().collect()).unwrap_or_default();
        let migratable = self.is_migratable(&instance);
        Ok(InstanceView { instance, entities, objectives, migratable })
    }

    /// Running instance of an unstable model with a newer published version.
    pub fn is_migratable(&self, instance: &ProcessInstance) -> bool {
        let Some(pinned) = self.registry.resolve(&instance.model) else { return false };
        instance.is_running()
            && pinned.typology.stability == Stability::Unstable
            && self.registry.latest(&instance.model.name).is_some_and(|latest| latest.version > instance.model.version)
    }

    fn pinned(&self, instance: &ProcessInstance) -> Result<Arc<ProcessModel>, EngineError> {
        self.registry.resolve(&instance.model).cloned().ok_or_else(|| EngineError::UnknownModel {
            name: instance.model.name.clone(),
            version: Some(instance.model.version),
        })
    }

    fn check_clock(instance: &ProcessInstance, at: Timestamp) -> Result<(), EngineError> {
        if at < instance.last_event_at {
            return Err(EngineError::ClockSkew { instance: instance.id.clone(), last: instance.last_event_at, at });
        }
        Ok(())
    }

    fn commit(&mut self, events: Vec<TraceEvent>) -> Result<(), EngineError> {
        let staged = self.log.stage(events)?;
        if let Some(sink) = self.sink.as_mut() {
            sink.persist(&staged).map_err(|e| EngineError::StorageFailure(e.to_string()))?;
        }
        for e in &staged {
            if let Err(reason) = self.state.apply(&self.registry, e) {
                panic!("engine emitted an illegal event (seq {}): {reason}", e.seq);
            }
        }
        self.log.commit(staged);
        Ok(())
    }

    /// Starts a process instance on the given (or latest) model version,
    /// creating its root entity in the initial state.
    pub fn instantiate(
        &mut self,
        model: &str,
        version: Option<u32>,
        attributes: Attributes,
        actor: Option<&str>,
        at: Timestamp,
    ) -> Result<InstanceView, EngineError> {
        let unknown = || EngineError::UnknownModel { name: model.to_string(), version };
        let def = match version {
            Some(v) => self.registry.get(model, v),
            None => self.registry.latest(model),
        }
        .cloned()
        .ok_or_else(unknown)?;

        if def.typology.genericity == Genericity::SingleInstance
            && self.state.instances.values().any(|i| i.is_running() && i.model.name == def.name)
        {
            return Err(EngineError::SingleInstanceViolation(def.name.clone()));
        }
        let root = def.root_type().ok_or_else(unknown)?;
        let lifecycle = def.lifecycle(&root.lifecycle).ok_or_else(unknown)?;
        for (name, value) in &attributes {
            let attr = root.attribute(name).ok_or_else(|| EngineError::InvalidParameter {
                name: name.clone(),
                reason: format!("not an attribute of {}", root.name),
            })?;
            if !attr.kind.accepts(value) {
                return Err(EngineError::InvalidParameter {
                    name: name.clone(),
                    reason: format!("expected a {:?} value", attr.kind).to_lowercase(),
                });
            }
        }

        let id = self.state.next_instance_id();
        let mut event = TraceEvent::new(EventKind::InstanceStarted, id.clone(), at)
            .entity(self.state.next_entity_id(0))
            .states(None, lifecycle.initial())
            .with("model", def.name.as_str())
            .with("version", def.version)
            .with("entity_type", root.name.as_str())
            .with("attributes", to_object(attributes));
        if let Some(actor) = actor {
            event = event.actor(actor);
        }
        self.commit(vec![event])?;
        self.instance_view(&id)
    }

    /// Work items the actor may perform, oldest first (ties by instance id).
    pub fn worklist(&self, actor: &Actor, as_of: Timestamp) -> Vec<WorkItem> {
        let mut items: Vec<(WorkItem, usize)> = Vec::new();
        for instance in self.state.instances.values().filter(|i| i.is_running()) {
            let Some(model) = self.registry.resolve(&instance.model) else { continue };
            for entity in self.state.entities_of(instance) {
                if entity.state_since > as_of {
                    continue;
                }
                for (order, activity) in model.activities.iter().enumerate() {
                    if activity.entity_type == entity.entity_type
                        && activity.transition.from == entity.state
                        && actor.can_perform(activity)
                    {
                        items.push((
                            WorkItem {
                                instance: instance.id.clone(),
                                activity: activity.name.clone(),
                                entity: entity.id.clone(),
                                enabled_since: entity.state_since,
                            },
                            order,
                        ));
                    }
                }
            }
        }
        items.sort_by(|(a, ao), (b, bo)| {
            a.enabled_since.cmp(&b.enabled_since).then_with(|| a.instance.cmp(&b.instance)).then_with(|| ao.cmp(bo))
        });
        items.into_iter().map(|(item, _)| item).collect()
    }

    /// Executes one activity: moves its entity along the lifecycle, records
    /// the change, completes the instance when every context entity is
    /// terminal (time-limited models) and re-evaluates the attached objective.
    pub fn perform_activity(
        &mut self,
        instance_id: &InstanceId,
        activity_name: &str,
        actor: &Actor,
        parameters: Attributes,
        at: Timestamp,
    ) -> Result<InstanceView, EngineError> {
        let instance = self.instance(instance_id)?.clone();
        if !instance.is_running() {
            return Err(EngineError::NotRunning(instance.id));
        }
        Self::check_clock(&instance, at)?;
        let model = self.pinned(&instance)?;
        let activity =
            model.activity(activity_name).ok_or_else(|| EngineError::UnknownActivity(activity_name.to_string()))?;
        let from = activity.transition.from.as_str();
        let entity = instance.data_context.get(&activity.entity_type).and_then(|id| self.state.entity(id)).cloned();
        let entity = match entity {
            Some(e) if e.state == from => e,
            other => {
                return Err(EngineError::WrongState {
                    activity: activity.name.clone(),
                    expected: from.to_string(),
                    actual: other.map(|e| e.state),
                })
            }
        };
        if !actor.can_perform(activity) {
            return Err(EngineError::Forbidden {
                actor: actor.id.clone(),
                role: activity.required_role.clone(),
                min_expertise: activity.min_expertise,
            });
        }

        let entity_type = model
            .entity_type(&entity.entity_type)
            .ok_or_else(|| EngineError::UnknownActivity(activity_name.to_string()))?;
        let has_outcomes = matches!(activity.transition.to, TransitionTarget::Outcomes(_));
        let mut updates = Attributes::new();
        let mut outcome = None;
        for (name, value) in parameters {
            if has_outcomes && name == OUTCOME_PARAMETER {
                outcome = Some(value);
                continue;
            }
            let attr = entity_type.attribute(&name).ok_or_else(|| EngineError::InvalidParameter {
                name: name.clone(),
                reason: format!("not an attribute of {}", entity_type.name),
            })?;
            if !attr.kind.accepts(&value) {
                return Err(EngineError::InvalidParameter {
                    name,
                    reason: format!("expected a {:?} value", attr.kind).to_lowercase(),
                });
            }
            updates.insert(name, value);
        }

        let (to, outcome_key) = match &activity.transition.to {
            TransitionTarget::State(to) => (to.clone(), None),
            TransitionTarget::Outcomes(choices) => {
                let value = outcome.ok_or_else(|| EngineError::MissingInput(OUTCOME_PARAMETER.to_string()))?;
                let key = value.as_str().unwrap_or_default().to_string();
                let to = choices.get(&key).cloned().ok_or_else(|| EngineError::InvalidParameter {
                    name: OUTCOME_PARAMETER.to_string(),
                    reason: format!("expected one of {}", choices.keys().cloned().collect::<Vec<_>>().join(", ")),
                })?;
                (to, Some(key))
            }
        };

        let populated = |name: &str| updates.get(name).or_else(|| entity.attributes.get(name)).filter(|v| !v.is_null());
        if let Some(missing) = activity.inputs.iter().find(|i| populated(i).is_none()) {
            return Err(EngineError::MissingInput(missing.clone()));
        }

        let mut changed = TraceEvent::new(EventKind::StateChanged, instance.id.clone(), at)
            .entity(entity.id.clone())
            .activity(activity.name.as_str())
            .actor(actor.id.as_str())
            .states(Some(from), &to);
        if let Some(key) = &outcome_key {
            changed = changed.with(OUTCOME_PARAMETER, key.as_str());
        }

        // Post-transition states of the data context, for the completion rule.
        let mut context_states: Vec<(String, String)> = instance
            .data_context
            .iter()
            .filter_map(|(ty, id)| {
                let e = self.state.entity(id)?;
                let state = if e.id == entity.id { to.clone() } else { e.state.clone() };
                Some((ty.clone(), state))
            })
            .collect();

        if let Some(child_name) = &activity.creates {
            let child_type =
                model.entity_type(child_name).ok_or_else(|| EngineError::UnknownActivity(activity_name.to_string()))?;
            let child_lc = model
                .lifecycle(&child_type.lifecycle)
                .ok_or_else(|| EngineError::UnknownActivity(activity_name.to_string()))?;
            let mut attributes = Attributes::new();
            if let Some(key) = &child_type.parent_key {
                if let Some(v) = populated(key) {
                    attributes.insert(key.clone(), v.clone());
                }
            }
            let created = CreatedEntity {
                entity: self.state.next_entity_id(0),
                entity_type: child_type.name.clone(),
                state: child_lc.initial().to_string(),
                attributes,
            };
            context_states.retain(|(ty, _)| ty != &child_type.name);
            context_states.push((child_type.name.clone(), created.state.clone()));
            changed = changed.with("created", serde_json::to_value(&created).expect("serializable"));
        }
        if !updates.is_empty() {
            changed = changed.with("attributes", to_object(updates));
        }

        let mut events = vec![changed];
        if model.typology.time == TimeAxis::Limited {
            let mut considered = 0;
            let all_terminal = context_states.iter().all(|(ty, state)| match model.lifecycle_of(ty) {
                Some(lc) if !lc.terminal().is_empty() => {
                    considered += 1;
                    lc.is_terminal(state)
                }
                _ => true,
            });
            if all_terminal && considered > 0 {
                events.push(TraceEvent::new(EventKind::InstanceCompleted, instance.id.clone(), at));
            }
        }
        if let Some(objective) = activity.objective.as_ref().and_then(|o| model.objective(o)) {
            events.push(self.objective_event(objective, &instance.id, at, &events));
        }

        self.commit(events)?;
        self.instance_view(instance_id)
    }

    /// Current measurement of an objective: `(reached_now, metric value)`.
    fn measure_objective(
        &self,
        objective: &Objective,
        instance: &InstanceId,
        at: Timestamp,
        pending: &[TraceEvent],
    ) -> (bool, Option<f64>) {
        match objective.threshold_spec() {
            None => {
                let pending_attest = pending.iter().any(|e| {
                    e.kind == EventKind::ObjectiveAttested
                        && &e.instance == instance
                        && e.payload_str("objective") == Some(objective.name.as_str())
                });
                (pending_attest || self.state.is_attested(instance, &objective.name), None)
            }
            Some(spec) => {
                let value = self.indicators.get(&spec.metric).and_then(|def| {
                    evaluate_indicator(def, &self.indicators, EventView::new(self.log.events(), pending), at)
                        .ok()
                        .and_then(|v| v.value.numeric())
                });
                (value.is_some_and(|v| spec.comparator.holds(v, spec.bound)), value)
            }
        }
    }

    fn objective_event(
        &self,
        objective: &Objective,
        instance: &InstanceId,
        at: Timestamp,
        pending: &[TraceEvent],
    ) -> TraceEvent {
        let (now, value) = self.measure_objective(objective, instance, at, pending);
        let previous = self.state.objective_status(instance, &objective.name).is_some_and(|s| s.reached);
        let reached = ObjectiveStatus::settle(previous, objective.continuity, now);
        TraceEvent::new(EventKind::ObjectiveEvaluated, instance.clone(), at)
            .with("objective", objective.name.as_str())
            .with("reached", reached)
            .with("value", value.map_or(Value::Null, Value::from))
    }

    /// Evaluates an objective on demand and records the result.
    pub fn evaluate_objective(
        &mut self,
        objective: &str,
        instance_id: &InstanceId,
        at: Timestamp,
    ) -> Result<ObjectiveStatus, EngineError> {
        let instance = self.instance(instance_id)?.clone();
        let model = self.pinned(&instance)?;
        let def = model.objective(objective).ok_or_else(|| EngineError::UnknownObjective(objective.to_string()))?;
        Self::check_clock(&instance, at)?;
        let event = self.objective_event(def, instance_id, at, &[]);
        self.commit(vec![event])?;
        Ok(self.state.objective_status(instance_id, objective).cloned().expect("just recorded"))
    }

    /// Records a manual attestation of a non-measurable objective.
    pub fn attest_objective(
        &mut self,
        objective: &str,
        instance_id: &InstanceId,
        actor: &Actor,
        at: Timestamp,
    ) -> Result<ObjectiveStatus, EngineError> {
        let instance = self.instance(instance_id)?.clone();
        let model = self.pinned(&instance)?;
        let def = model.objective(objective).ok_or_else(|| EngineError::UnknownObjective(objective.to_string()))?;
        if def.kind() != ObjectiveKind::Attestation {
            return Err(EngineError::KindMismatch(objective.to_string()));
        }
        if !actor.roles.keys().any(|r| model.has_role(r)) {
            return Err(EngineError::Forbidden {
                actor: actor.id.clone(),
                role: "any role of the model".to_string(),
                min_expertise: 0,
            });
        }
        Self::check_clock(&instance, at)?;
        let event = TraceEvent::new(EventKind::ObjectiveAttested, instance_id.clone(), at)
            .actor(actor.id.as_str())
            .with("objective", objective);
        self.commit(vec![event])?;
        Ok(self.state.objective_status(instance_id, objective).cloned().expect("just recorded"))
    }

    /// Re-pins a running instance of an unstable model to another published version.
    pub fn migrate_instance(
        &mut self,
        instance_id: &InstanceId,
        to_version: u32,
        actor: &str,
        at: Timestamp,
    ) -> Result<InstanceView, EngineError> {
        let instance = self.instance(instance_id)?.clone();
        let model = self.pinned(&instance)?;
        if model.typology.stability != Stability::Unstable {
            return Err(EngineError::StabilityForbids(model.name.clone()));
        }
        if !instance.is_running() {
            return Err(EngineError::NotRunning(instance.id));
        }
        let target = self
            .registry
            .get(&model.name, to_version)
            .cloned()
            .ok_or_else(|| EngineError::UnknownModel { name: model.name.clone(), version: Some(to_version) })?;
        for entity in self.state.entities_of(&instance) {
            if !target.lifecycle_of(&entity.entity_type).is_some_and(|lc| lc.has_state(&entity.state)) {
                return Err(EngineError::StateNotInTarget {
                    entity_type: entity.entity_type.clone(),
                    state: entity.state.clone(),
                });
            }
        }
        Self::check_clock(&instance, at)?;
        let event = TraceEvent::new(EventKind::InstanceMigrated, instance.id.clone(), at)
            .actor(actor)
            .with("from_version", instance.model.version)
            .with("to_version", to_version);
        self.commit(vec![event])?;
        self.instance_view(instance_id)
    }

    pub fn evaluate_indicator(&self, name: &str, as_of: Timestamp) -> Result<IndicatorValue, EngineError> {
        let def = self.indicators.get(name).ok_or_else(|| EngineError::UnknownIndicator(name.to_string()))?;
        Ok(evaluate_indicator(def, &self.indicators, self.log.events(), as_of)?)
    }

    /// Drift lists for every installed `overdue_count` indicator.
    pub fn drift(&self, as_of: Timestamp) -> Vec<DriftReport> {
        self.indicators
            .defs()
            .iter()
            .filter_map(|def| match &def.spec {
                IndicatorSpec::OverdueCount { model, state, max_dwell_ms } => Some(DriftReport {
                    indicator: def.name.clone(),
                    model: model.clone(),
                    state: state.clone(),
                    max_dwell_ms: *max_dwell_ms,
                    items: detect_drift(self.log.events(), model, state, *max_dwell_ms, as_of),
                }),
                _ => None,
            })
            .collect()
    }

    pub fn scorecard(&self, as_of: Timestamp) -> Scorecard {
        scorecard_report(&self.indicators, self.log.events(), as_of)
    }
}

fn to_object(map: Attributes) -> Value {
    Value::Object(map.into_iter().collect())
}
