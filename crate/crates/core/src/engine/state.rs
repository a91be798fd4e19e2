use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::{EntityId, InstanceId};
use crate::model::{Continuity, ModelRef, ModelRegistry, ProcessModel};
use crate::time::Timestamp;
use crate::trace::{EventKind, TraceEvent};

pub type Attributes = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Running,
    Completed,
    /// Reserved for externally terminated instances; no engine operation sets it.
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessInstance {
    pub id: InstanceId,
    pub model: ModelRef,
    /// entity type name -> entity currently playing that role
    pub data_context: BTreeMap<String, EntityId>,
    pub status: InstanceStatus,
    pub started_at: Timestamp,
    pub ended_at: Option<Timestamp>,
    pub last_event_at: Timestamp,
}

impl ProcessInstance {
    pub fn is_running(&self) -> bool {
        self.status == InstanceStatus::Running
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityInstance {
    pub id: EntityId,
    pub entity_type: String,
    pub instance: InstanceId,
    pub attributes: Attributes,
    pub state: String,
    pub parent: Option<EntityId>,
    pub created_at: Timestamp,
    /// When the entity entered its current state.
    pub state_since: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub at: Timestamp,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveStatus {
    pub objective: String,
    pub reached: bool,
    pub last_evaluated: Timestamp,
    pub history: Vec<ObjectivePoint>,
}

impl ObjectiveStatus {
    pub fn new(objective: impl Into<String>, at: Timestamp) -> Self {
        ObjectiveStatus { objective: objective.into(), reached: false, last_evaluated: at, history: Vec::new() }
    }

    /// Status after observing `reached_now` at `at`. A monotone objective that
    /// has been reached once stays reached.
    pub fn settle(previous: bool, continuity: Continuity, reached_now: bool) -> bool {
        match continuity {
            Continuity::Monotone => previous || reached_now,
            Continuity::Revisable => reached_now,
        }
    }

    pub fn record(&mut self, at: Timestamp, reached: bool) {
        self.reached = reached;
        self.last_evaluated = at;
        self.history.push(ObjectivePoint { at, reached });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub actor: Option<String>,
    pub at: Timestamp,
}

/// Everything the engine knows, reconstructible from the event log alone
/// (given the published models).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub last_seq: u64,
    pub instances: BTreeMap<InstanceId, ProcessInstance>,
    pub entities: BTreeMap<EntityId, EntityInstance>,
    pub objectives: BTreeMap<InstanceId, BTreeMap<String, ObjectiveStatus>>,
    pub attestations: BTreeMap<InstanceId, BTreeMap<String, Vec<Attestation>>>,
}

impl EngineState {
    pub fn instance(&self, id: &InstanceId) -> Option<&ProcessInstance> {
        self.instances.get(id)
    }

    pub fn entity(&self, id: &EntityId) -> Option<&EntityInstance> {
        self.entities.get(id)
    }

    pub fn entities_of<'a>(&'a self, instance: &'a ProcessInstance) -> impl Iterator<Item = &'a EntityInstance> + 'a {
        instance.data_context.values().filter_map(|id| self.entities.get(id))
    }

    pub fn objective_status(&self, instance: &InstanceId, objective: &str) -> Option<&ObjectiveStatus> {
        self.objectives.get(instance)?.get(objective)
    }

    pub fn is_attested(&self, instance: &InstanceId, objective: &str) -> bool {
        self.attestations.get(instance).and_then(|m| m.get(objective)).is_some_and(|v| !v.is_empty())
    }

    pub fn next_instance_id(&self) -> InstanceId {
        InstanceId::sequential(self.instances.len() + 1)
    }

    pub fn next_entity_id(&self, offset: usize) -> EntityId {
        EntityId::sequential(self.entities.len() + 1 + offset)
    }

    /// Applies one event, checking that it is a legal continuation of this
    /// state. Returns a description of the problem otherwise.
    pub fn apply(&mut self, registry: &ModelRegistry, e: &TraceEvent) -> Result<(), String> {
        if e.seq != self.last_seq + 1 {
            return Err(format!("expected seq {}, found {}", self.last_seq + 1, e.seq));
        }
        if e.kind != EventKind::InstanceStarted {
            let inst =
                self.instances.get(&e.instance).ok_or_else(|| format!("event for unknown instance {}", e.instance))?;
            if e.at < inst.last_event_at {
                return Err(format!("timestamp {} precedes {} on {}", e.at, inst.last_event_at, e.instance));
            }
        }
        match e.kind {
            EventKind::InstanceStarted => self.apply_started(registry, e)?,
            EventKind::StateChanged => self.apply_state_changed(registry, e)?,
            EventKind::InstanceCompleted => {
                let inst = self.instances.get_mut(&e.instance).expect("checked above");
                if !inst.is_running() {
                    return Err(format!("instance {} completed twice", e.instance));
                }
                inst.status = InstanceStatus::Completed;
                inst.ended_at = Some(e.at);
            }
            EventKind::ObjectiveAttested => {
                let objective = required_str(e, "objective")?;
                let model = self.pinned_model(registry, &e.instance)?;
                if model.objective(objective).is_none() {
                    return Err(format!("attestation of undeclared objective {objective:?}"));
                }
                self.attestations
                    .entry(e.instance.clone())
                    .or_default()
                    .entry(objective.to_string())
                    .or_default()
                    .push(Attestation { actor: e.actor.clone(), at: e.at });
                self.objectives
                    .entry(e.instance.clone())
                    .or_default()
                    .entry(objective.to_string())
                    .or_insert_with(|| ObjectiveStatus::new(objective, e.at))
                    .record(e.at, true);
            }
            EventKind::ObjectiveEvaluated => {
                let objective = required_str(e, "objective")?;
                let reached = e
                    .payload
                    .get("reached")
                    .and_then(Value::as_bool)
                    .ok_or("objective_evaluated without boolean 'reached'")?;
                let model = self.pinned_model(registry, &e.instance)?;
                let def = model
                    .objective(objective)
                    .ok_or_else(|| format!("evaluation of undeclared objective {objective:?}"))?;
                let status = self
                    .objectives
                    .entry(e.instance.clone())
                    .or_default()
                    .entry(objective.to_string())
                    .or_insert_with(|| ObjectiveStatus::new(objective, e.at));
                if def.continuity == Continuity::Monotone && status.reached && !reached {
                    return Err(format!("monotone objective {objective:?} reverted to not reached"));
                }
                status.record(e.at, reached);
            }
            EventKind::InstanceMigrated => {
                let to = e
                    .payload
                    .get("to_version")
                    .and_then(Value::as_u64)
                    .ok_or("instance_migrated without 'to_version'")? as u32;
                let name = self.instances[&e.instance].model.name.clone();
                let target = registry.get(&name, to).ok_or_else(|| format!("migration to unpublished {name} v{to}"))?;
                let inst = &self.instances[&e.instance];
                for entity in inst.data_context.values() {
                    let ent = &self.entities[entity];
                    let ok = target.lifecycle_of(&ent.entity_type).is_some_and(|lc| lc.has_state(&ent.state));
                    if !ok {
                        return Err(format!("state {:?} of {} missing in v{to}", ent.state, ent.id));
                    }
                }
                self.instances.get_mut(&e.instance).expect("exists").model.version = to;
            }
        }
        if let Some(inst) = self.instances.get_mut(&e.instance) {
            inst.last_event_at = e.at;
        }
        self.last_seq = e.seq;
        Ok(())
    }

    fn pinned_model<'r>(
        &self,
        registry: &'r ModelRegistry,
        instance: &InstanceId,
    ) -> Result<&'r std::sync::Arc<ProcessModel>, String> {
        let inst = &self.instances[instance];
        registry.resolve(&inst.model).ok_or_else(|| format!("instance {instance} pinned to unpublished {}", inst.model))
    }

    fn apply_started(&mut self, registry: &ModelRegistry, e: &TraceEvent) -> Result<(), String> {
        if self.instances.contains_key(&e.instance) {
            return Err(format!("instance {} started twice", e.instance));
        }
        let name = required_str(e, "model")?;
        let version = e.payload.get("version").and_then(Value::as_u64).ok_or("missing 'version'")? as u32;
        let model = registry.get(name, version).ok_or_else(|| format!("unpublished model {name} v{version}"))?;
        let root = model.root_type().ok_or("model without entity types")?;
        let lc = model.lifecycle(&root.lifecycle).ok_or("root lifecycle missing")?;
        let entity = e.entity.clone().ok_or("instance_started without entity")?;
        if self.entities.contains_key(&entity) {
            return Err(format!("entity {entity} created twice"));
        }
        if e.to_state.as_deref() != Some(lc.initial()) {
            return Err(format!("root entity must start in {:?}", lc.initial()));
        }
        let attributes = object_payload(e, "attributes")?;
        self.entities.insert(
            entity.clone(),
            EntityInstance {
                id: entity.clone(),
                entity_type: root.name.clone(),
                instance: e.instance.clone(),
                attributes,
                state: lc.initial().to_string(),
                parent: None,
                created_at: e.at,
                state_since: e.at,
            },
        );
        self.instances.insert(
            e.instance.clone(),
            ProcessInstance {
                id: e.instance.clone(),
                model: model.reference(),
                data_context: BTreeMap::from([(root.name.clone(), entity)]),
                status: InstanceStatus::Running,
                started_at: e.at,
                ended_at: None,
                last_event_at: e.at,
            },
        );
        Ok(())
    }

    fn apply_state_changed(&mut self, registry: &ModelRegistry, e: &TraceEvent) -> Result<(), String> {
        let model = self.pinned_model(registry, &e.instance)?.clone();
        if !self.instances[&e.instance].is_running() {
            return Err(format!("state change on finished instance {}", e.instance));
        }
        let entity_id = e.entity.as_ref().ok_or("state_changed without entity")?;
        let activity_name = e.activity.as_deref().ok_or("state_changed without activity")?;
        if e.actor.is_none() {
            return Err("state_changed without actor".into());
        }
        let from = e.from_state.as_deref().ok_or("state_changed without from_state")?;
        let to = e.to_state.as_deref().ok_or("state_changed without to_state")?;

        let entity = self
            .entities
            .get(entity_id)
            .filter(|x| x.instance == e.instance)
            .ok_or_else(|| format!("entity {entity_id} not part of {}", e.instance))?;
        if entity.state != from {
            return Err(format!("entity {entity_id} is in {:?}, event claims {from:?}", entity.state));
        }
        let activity = model.activity(activity_name).ok_or_else(|| format!("unknown activity {activity_name:?}"))?;
        if activity.entity_type != entity.entity_type || !activity.edges().contains(&(from, to)) {
            return Err(format!("activity {activity_name:?} cannot move {from:?} -> {to:?}"));
        }
        let lc = model.lifecycle_of(&entity.entity_type).ok_or("lifecycle missing")?;
        if !lc.allows(from, to) {
            return Err(format!("illegal transition {from:?} -> {to:?}"));
        }

        let updates = object_payload(e, "attributes")?;
        let entity = self.entities.get_mut(entity_id).expect("checked");
        entity.attributes.extend(updates);
        entity.state = to.to_string();
        entity.state_since = e.at;

        if let Some(created) = e.payload.get("created") {
            let child: CreatedEntity =
                serde_json::from_value(created.clone()).map_err(|err| format!("bad 'created' payload: {err}"))?;
            let child_type = model
                .entity_type(&child.entity_type)
                .ok_or_else(|| format!("unknown entity type {:?}", child.entity_type))?;
            let child_lc = model.lifecycle(&child_type.lifecycle).ok_or("child lifecycle missing")?;
            if child.state != child_lc.initial() {
                return Err(format!("child must start in {:?}", child_lc.initial()));
            }
            if self.entities.contains_key(&child.entity) {
                return Err(format!("entity {} created twice", child.entity));
            }
            self.entities.insert(
                child.entity.clone(),
                EntityInstance {
                    id: child.entity.clone(),
                    entity_type: child.entity_type.clone(),
                    instance: e.instance.clone(),
                    attributes: child.attributes,
                    state: child.state,
                    parent: Some(entity_id.clone()),
                    created_at: e.at,
                    state_since: e.at,
                },
            );
            self.instances.get_mut(&e.instance).expect("exists").data_context.insert(child.entity_type, child.entity);
        }
        Ok(())
    }
}

/// Payload describing a child entity created by an activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedEntity {
    pub entity: EntityId,
    pub entity_type: String,
    pub state: String,
    pub attributes: Attributes,
}

fn required_str<'e>(e: &'e TraceEvent, key: &str) -> Result<&'e str, String> {
    e.payload_str(key).ok_or_else(|| format!("{} event missing {key:?}", e.kind.as_str()))
}

fn object_payload(e: &TraceEvent, key: &str) -> Result<Attributes, String> {
    match e.payload.get(key) {
        None => Ok(Attributes::new()),
        Some(Value::Object(map)) => Ok(map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
        Some(_) => Err(format!("payload {key:?} must be an object")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settle_rules() {
        use Continuity::*;
        assert!(ObjectiveStatus::settle(true, Monotone, false));
        assert!(!ObjectiveStatus::settle(true, Revisable, false));
        assert!(ObjectiveStatus::settle(false, Revisable, true));
        assert!(!ObjectiveStatus::settle(false, Monotone, false));
    }

    #[test]
    fn apply_rejects_unknown_instance_and_gaps() {
        let registry = ModelRegistry::new();
        let mut state = EngineState::default();
        let mut e = TraceEvent::new(EventKind::InstanceCompleted, InstanceId::new("I-1"), Timestamp::from_millis(0));
        e.seq = 1;
        assert!(state.apply(&registry, &e).unwrap_err().contains("unknown instance"));
        e.seq = 2;
        assert!(state.apply(&registry, &e).unwrap_err().contains("expected seq 1"));
    }
}
