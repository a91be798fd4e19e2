//! Process models: entity types bound to lifecycles, activities gated by role
//! and expertise, objectives, and the four-axis typology that constrains them.

mod lifecycle;
mod registry;
mod typology;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use lifecycle::{LifecycleDef, LifecycleError, LifecycleSpec, Transition};
pub use registry::{ModelRef, ModelRegistry};
pub use typology::{Genericity, Measurability, ProcessTypology, Stability, TimeAxis};
pub use validate::{validate_process_model, Rule, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Text,
    Number,
    Date,
    Money,
    Reference,
}

impl AttributeKind {
    /// Whether a JSON value is an acceptable payload for this kind.
    pub fn accepts(self, value: &serde_json::Value) -> bool {
        use serde_json::Value;
        match (self, value) {
            (_, Value::Null) => false,
            (AttributeKind::Text | AttributeKind::Reference, Value::String(_)) => true,
            (AttributeKind::Number | AttributeKind::Money, Value::Number(_)) => true,
            (AttributeKind::Date, Value::String(s)) => {
                chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
                    || chrono::DateTime::parse_from_rfc3339(s).is_ok()
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTypeDef {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<AttributeDef>,
    pub lifecycle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_parent: Option<String>,
    /// Attribute shared with the parent type; copied from the parent when a
    /// child entity is created and used to link the two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_key: Option<String>,
}

impl EntityTypeDef {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

/// Where an activity moves its entity: one fixed state, or one of several
/// chosen by an `outcome` parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionTarget {
    State(String),
    Outcomes(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityTransition {
    pub from: String,
    pub to: TransitionTarget,
}

/// Name of the parameter that selects among [`TransitionTarget::Outcomes`].
pub const OUTCOME_PARAMETER: &str = "outcome";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityDef {
    pub name: String,
    pub entity_type: String,
    pub transition: ActivityTransition,
    pub required_role: String,
    #[serde(default)]
    pub min_expertise: u32,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    /// Entity type created as a child of this activity's entity on completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creates: Option<String>,
}

impl ActivityDef {
    /// All `(from, to)` edges this activity can take.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let from = self.transition.from.as_str();
        match &self.transition.to {
            TransitionTarget::State(to) => vec![(from, to.as_str())],
            TransitionTarget::Outcomes(map) => map.values().map(|to| (from, to.as_str())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Threshold,
    Attestation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    /// Once reached, stays reached.
    Monotone,
    /// Follows the latest evaluation.
    Revisable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::AtMost => value <= bound,
            Comparator::AtLeast => value >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// Name of an indicator definition.
    pub metric: String,
    pub comparator: Comparator,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObjectiveDoc {
    name: String,
    kind: ObjectiveKind,
    continuity: Continuity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<ThresholdSpec>,
}

/// An aim attached to a process: either a measurable threshold over an
/// indicator or a manual attestation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObjectiveDoc", into = "ObjectiveDoc")]
pub struct Objective {
    pub name: String,
    pub continuity: Continuity,
    threshold: Option<ThresholdSpec>,
}

impl Objective {
    pub fn threshold(name: impl Into<String>, continuity: Continuity, spec: ThresholdSpec) -> Self {
        Objective { name: name.into(), continuity, threshold: Some(spec) }
    }

    pub fn attestation(name: impl Into<String>, continuity: Continuity) -> Self {
        Objective { name: name.into(), continuity, threshold: None }
    }

    pub fn kind(&self) -> ObjectiveKind {
        if self.threshold.is_some() {
            ObjectiveKind::Threshold
        } else {
            ObjectiveKind::Attestation
        }
    }

    pub fn threshold_spec(&self) -> Option<&ThresholdSpec> {
        self.threshold.as_ref()
    }
}

impl TryFrom<ObjectiveDoc> for Objective {
    type Error = String;

    fn try_from(doc: ObjectiveDoc) -> Result<Self, Self::Error> {
        match (doc.kind, doc.threshold) {
            (ObjectiveKind::Threshold, None) => Err(format!("threshold objective {:?} has no threshold", doc.name)),
            (ObjectiveKind::Attestation, Some(_)) => {
                Err(format!("attestation objective {:?} must not carry a threshold", doc.name))
            }
            (_, threshold) => Ok(Objective { name: doc.name, continuity: doc.continuity, threshold }),
        }
    }
}

impl From<Objective> for ObjectiveDoc {
    fn from(o: Objective) -> Self {
        let kind = o.kind();
        ObjectiveDoc { name: o.name, kind, continuity: o.continuity, threshold: o.threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleHolder {
    pub actor: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub expertise: u32,
}

/// A role and the actors holding it, with their expertise rank in the role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub holders: Vec<RoleHolder>,
}

/// A person (or system) that performs activities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub id: String,
    #[serde(default)]
    pub name: String,
    /// role -> expertise rank
    #[serde(default)]
    pub roles: BTreeMap<String, u32>,
}

impl Actor {
    pub fn new(id: impl Into<String>) -> Self {
        Actor { id: id.into(), name: String::new(), roles: BTreeMap::new() }
    }

    pub fn with_role(mut self, role: impl Into<String>, expertise: u32) -> Self {
        self.roles.insert(role.into(), expertise);
        self
    }

    pub fn satisfies(&self, role: &str, min_expertise: u32) -> bool {
        self.roles.get(role).is_some_and(|&rank| rank >= min_expertise)
    }

    pub fn can_perform(&self, activity: &ActivityDef) -> bool {
        self.satisfies(&activity.required_role, activity.min_expertise)
    }
}

/// A versioned process definition, as stored in a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub name: String,
    pub version: u32,
    pub typology: ProcessTypology,
    /// The first entry is the root entity created on instantiation.
    pub entity_types: Vec<EntityTypeDef>,
    pub lifecycles: Vec<LifecycleDef>,
    pub activities: Vec<ActivityDef>,
    #[serde(default)]
    pub objectives: Vec<Objective>,
    #[serde(default)]
    pub roles: Vec<RoleDef>,
}

impl ProcessModel {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn root_type(&self) -> Option<&EntityTypeDef> {
        self.entity_types.first()
    }

    pub fn entity_type(&self, name: &str) -> Option<&EntityTypeDef> {
        self.entity_types.iter().find(|t| t.name == name)
    }

    pub fn lifecycle(&self, name: &str) -> Option<&LifecycleDef> {
        self.lifecycles.iter().find(|l| l.name() == name)
    }

    pub fn lifecycle_of(&self, entity_type: &str) -> Option<&LifecycleDef> {
        self.entity_type(entity_type).and_then(|t| self.lifecycle(&t.lifecycle))
    }

    pub fn activity(&self, name: &str) -> Option<&ActivityDef> {
        self.activities.iter().find(|a| a.name == name)
    }

    pub fn objective(&self, name: &str) -> Option<&Objective> {
        self.objectives.iter().find(|o| o.name == name)
    }

    pub fn has_role(&self, role: &str) -> bool {
        self.roles.iter().any(|r| r.name == role)
    }

    /// Actors declared through role holders, merged across roles.
    pub fn actors(&self) -> BTreeMap<String, Actor> {
        let mut actors: BTreeMap<String, Actor> = BTreeMap::new();
        for role in &self.roles {
            for holder in &role.holders {
                let actor = actors.entry(holder.actor.clone()).or_insert_with(|| Actor::new(&holder.actor));
                if actor.name.is_empty() {
                    actor.name = holder.name.clone();
                }
                let rank = actor.roles.entry(role.name.clone()).or_insert(holder.expertise);
                *rank = (*rank).max(holder.expertise);
            }
        }
        actors
    }

    pub fn reference(&self) -> ModelRef {
        ModelRef { name: self.name.clone(), version: self.version }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_shape_is_checked_on_parse() {
        let ok = r#"{"name":"o","kind":"threshold","continuity":"monotone",
                     "threshold":{"metric":"win_rate","comparator":">=","bound":0.5}}"#;
        let o: Objective = serde_json::from_str(ok).unwrap();
        assert_eq!(o.kind(), ObjectiveKind::Threshold);
        assert_eq!(o.threshold_spec().unwrap().comparator, Comparator::AtLeast);

        let attested_with_threshold = r#"{"name":"o","kind":"attestation","continuity":"monotone",
                     "threshold":{"metric":"m","comparator":"<=","bound":1}}"#;
        assert!(serde_json::from_str::<Objective>(attested_with_threshold).is_err());
        let bare_threshold = r#"{"name":"o","kind":"threshold","continuity":"monotone"}"#;
        assert!(serde_json::from_str::<Objective>(bare_threshold).is_err());
    }

    #[test]
    fn objective_serializes_kind() {
        let o = Objective::attestation("review", Continuity::Monotone);
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["kind"], "attestation");
        assert!(v.get("threshold").is_none());
    }

    #[test]
    fn expertise_gate() {
        let actor = Actor::new("erin").with_role("quality", 2);
        assert!(actor.satisfies("quality", 2));
        assert!(actor.satisfies("quality", 0));
        assert!(!actor.satisfies("quality", 3));
        assert!(!actor.satisfies("sales", 0));
    }

    #[test]
    fn attribute_kinds() {
        use serde_json::json;
        assert!(AttributeKind::Date.accepts(&json!("2024-03-01")));
        assert!(!AttributeKind::Date.accepts(&json!("March")));
        assert!(AttributeKind::Money.accepts(&json!(1250.5)));
        assert!(!AttributeKind::Number.accepts(&json!("12")));
        assert!(!AttributeKind::Text.accepts(&json!(null)));
    }

    #[test]
    fn outcome_targets_parse() {
        let a: ActivityTransition =
            serde_json::from_str(r#"{"from":"UnderAnalysis","to":{"won":"Won","lost":"Lost"}}"#).unwrap();
        assert!(matches!(a.to, TransitionTarget::Outcomes(ref m) if m.len() == 2));
        let a: ActivityTransition = serde_json::from_str(r#"{"from":"Draft","to":"Registered"}"#).unwrap();
        assert_eq!(a.to, TransitionTarget::State("Registered".into()));
    }
}
