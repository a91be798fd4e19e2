//! Consistency rules for process models.
//!
//! Typology rules:
//!
//! * (a) `time = limited` requires a terminal state in every referenced lifecycle.
//! * (b) `time = cyclical` requires some referenced lifecycle to cycle through its initial state.
//! * (c) `measurability = not_measurable` forbids threshold objectives.
//! * (d) `measurability = measurable` requires at least one threshold objective.
//! * (e) every activity transition must be an edge of its entity's lifecycle.
//! * (f) an activity creating a child entity must take the parent key as input.
//!
//! Everything else reported here is a structural problem (dangling reference,
//! duplicate name, parent cycle).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Measurability, ObjectiveKind, ProcessModel, TimeAxis, TransitionTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    LimitedNeedsTerminal,
    CyclicalNeedsCycle,
    NotMeasurableForbidsThreshold,
    MeasurableNeedsThreshold,
    LegalTransition,
    ParentReference,
    Structure,
}

impl Rule {
    /// Short letter used in reports, `-` for structural problems.
    pub fn letter(self) -> char {
        match self {
            Rule::LimitedNeedsTerminal => 'a',
            Rule::CyclicalNeedsCycle => 'b',
            Rule::NotMeasurableForbidsThreshold => 'c',
            Rule::MeasurableNeedsThreshold => 'd',
            Rule::LegalTransition => 'e',
            Rule::ParentReference => 'f',
            Rule::Structure => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    LimitedWithoutTerminal { lifecycle: String },
    CyclicalWithoutCycle,
    ThresholdOnNotMeasurable { objective: String },
    MeasurableWithoutThreshold,
    IllegalTransition { activity: String, from: String, to: String },
    MissingParentReference { activity: String, entity_type: String, parent_key: String },
    WrongParentCreator { activity: String, entity_type: String, parent: String },
    NoEntityTypes,
    RootHasParent { entity_type: String },
    DuplicateEntityType { entity_type: String },
    DuplicateLifecycle { lifecycle: String },
    DuplicateAttribute { entity_type: String, attribute: String },
    UnknownLifecycle { entity_type: String, lifecycle: String },
    UnknownParent { entity_type: String, parent: String },
    ParentCycle { entity_type: String },
    ParentKeyMismatch { entity_type: String, detail: String },
    DuplicateActivity { activity: String },
    UnknownEntityType { activity: String, entity_type: String },
    UndeclaredInput { activity: String, input: String },
    UnknownObjective { activity: String, objective: String },
    DuplicateObjective { objective: String },
    UnknownRole { activity: String, role: String },
    EmptyOutcomes { activity: String },
    ZeroVersion,
}

impl Violation {
    pub fn rule(&self) -> Rule {
        match self {
            Violation::LimitedWithoutTerminal { .. } => Rule::LimitedNeedsTerminal,
            Violation::CyclicalWithoutCycle => Rule::CyclicalNeedsCycle,
            Violation::ThresholdOnNotMeasurable { .. } => Rule::NotMeasurableForbidsThreshold,
            Violation::MeasurableWithoutThreshold => Rule::MeasurableNeedsThreshold,
            Violation::IllegalTransition { .. } => Rule::LegalTransition,
            Violation::MissingParentReference { .. } | Violation::WrongParentCreator { .. } => Rule::ParentReference,
            _ => Rule::Structure,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) ", self.rule().letter())?;
        match self {
            Violation::LimitedWithoutTerminal { lifecycle } => {
                write!(f, "time-limited process but lifecycle {lifecycle:?} has no terminal state")
            }
            Violation::CyclicalWithoutCycle => {
                write!(f, "cyclical process but no lifecycle cycles back to its initial state")
            }
            Violation::ThresholdOnNotMeasurable { objective } => {
                write!(f, "non-measurable process carries threshold objective {objective:?}")
            }
            Violation::MeasurableWithoutThreshold => {
                write!(f, "measurable process declares no threshold objective")
            }
            Violation::IllegalTransition { activity, from, to } => {
                write!(f, "activity {activity:?} uses {from:?} -> {to:?}, not a lifecycle transition")
            }
            Violation::MissingParentReference { activity, entity_type, parent_key } => write!(
                f,
                "activity {activity:?} creates {entity_type:?} without taking parent key {parent_key:?} as input"
            ),
            Violation::WrongParentCreator { activity, entity_type, parent } => write!(
                f,
                "activity {activity:?} creates {entity_type:?} but does not act on its parent type {parent:?}"
            ),
            Violation::NoEntityTypes => write!(f, "model declares no entity types"),
            Violation::RootHasParent { entity_type } => {
                write!(f, "root entity type {entity_type:?} cannot require a parent")
            }
            Violation::DuplicateEntityType { entity_type } => {
                write!(f, "entity type {entity_type:?} declared twice")
            }
            Violation::DuplicateLifecycle { lifecycle } => write!(f, "lifecycle {lifecycle:?} declared twice"),
            Violation::DuplicateAttribute { entity_type, attribute } => {
                write!(f, "attribute {attribute:?} declared twice on {entity_type:?}")
            }
            Violation::UnknownLifecycle { entity_type, lifecycle } => {
                write!(f, "entity type {entity_type:?} references unknown lifecycle {lifecycle:?}")
            }
            Violation::UnknownParent { entity_type, parent } => {
                write!(f, "entity type {entity_type:?} requires unknown parent {parent:?}")
            }
            Violation::ParentCycle { entity_type } => {
                write!(f, "parent chain of {entity_type:?} loops back on itself")
            }
            Violation::ParentKeyMismatch { entity_type, detail } => {
                write!(f, "parent key of {entity_type:?}: {detail}")
            }
            Violation::DuplicateActivity { activity } => write!(f, "activity {activity:?} declared twice"),
            Violation::UnknownEntityType { activity, entity_type } => {
                write!(f, "activity {activity:?} references unknown entity type {entity_type:?}")
            }
            Violation::UndeclaredInput { activity, input } => {
                write!(f, "activity {activity:?} input {input:?} is not a declared attribute")
            }
            Violation::UnknownObjective { activity, objective } => {
                write!(f, "activity {activity:?} references undeclared objective {objective:?}")
            }
            Violation::DuplicateObjective { objective } => write!(f, "objective {objective:?} declared twice"),
            Violation::UnknownRole { activity, role } => {
                write!(f, "activity {activity:?} requires undeclared role {role:?}")
            }
            Violation::EmptyOutcomes { activity } => write!(f, "activity {activity:?} lists no outcomes"),
            Violation::ZeroVersion => write!(f, "version must be a positive integer"),
        }
    }
}

/// Checks a model against the structural and typology rules. Violations are
/// returned in a deterministic order; an empty list means the model is valid.
pub fn validate_process_model(model: &ProcessModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.version == 0 {
        out.push(Violation::ZeroVersion);
    }
    check_structure(model, &mut out);
    check_typology(model, &mut out);
    check_activities(model, &mut out);
    out
}

fn check_structure(model: &ProcessModel, out: &mut Vec<Violation>) {
    let mut lifecycles = BTreeSet::new();
    for lc in &model.lifecycles {
        if !lifecycles.insert(lc.name()) {
            out.push(Violation::DuplicateLifecycle { lifecycle: lc.name().to_string() });
        }
    }

    match model.root_type() {
        None => out.push(Violation::NoEntityTypes),
        Some(root) if root.required_parent.is_some() => {
            out.push(Violation::RootHasParent { entity_type: root.name.clone() })
        }
        Some(_) => {}
    }

    let mut seen = BTreeSet::new();
    for et in &model.entity_types {
        if !seen.insert(et.name.as_str()) {
            out.push(Violation::DuplicateEntityType { entity_type: et.name.clone() });
        }
        let mut attrs = BTreeSet::new();
        for a in &et.attributes {
            if !attrs.insert(a.name.as_str()) {
                out.push(Violation::DuplicateAttribute { entity_type: et.name.clone(), attribute: a.name.clone() });
            }
        }
        if model.lifecycle(&et.lifecycle).is_none() {
            out.push(Violation::UnknownLifecycle { entity_type: et.name.clone(), lifecycle: et.lifecycle.clone() });
        }
        check_parent_link(model, et, out);
    }

    // Parent graph must be acyclic; each type has at most one parent so a walk suffices.
    let parents: BTreeMap<&str, &str> =
        model.entity_types.iter().filter_map(|t| t.required_parent.as_deref().map(|p| (t.name.as_str(), p))).collect();
    for et in &model.entity_types {
        let mut visited = BTreeSet::from([et.name.as_str()]);
        let mut cursor = et.name.as_str();
        while let Some(&parent) = parents.get(cursor) {
            if !visited.insert(parent) {
                out.push(Violation::ParentCycle { entity_type: et.name.clone() });
                break;
            }
            cursor = parent;
        }
    }

    let mut objectives = BTreeSet::new();
    for o in &model.objectives {
        if !objectives.insert(o.name.as_str()) {
            out.push(Violation::DuplicateObjective { objective: o.name.clone() });
        }
    }
}

fn check_parent_link(model: &ProcessModel, et: &super::EntityTypeDef, out: &mut Vec<Violation>) {
    let mismatch = |detail: String| Violation::ParentKeyMismatch { entity_type: et.name.clone(), detail };
    match (&et.required_parent, &et.parent_key) {
        (None, None) => {}
        (None, Some(_)) => out.push(mismatch("declared without a required parent".into())),
        (Some(parent), key) => {
            let Some(parent_type) = model.entity_type(parent) else {
                out.push(Violation::UnknownParent { entity_type: et.name.clone(), parent: parent.clone() });
                return;
            };
            let Some(key) = key else {
                out.push(mismatch("required parent set but no parent key".into()));
                return;
            };
            if et.attribute(key).is_none() {
                out.push(mismatch(format!("{key:?} is not an attribute of {:?}", et.name)));
            }
            if parent_type.attribute(key).is_none() {
                out.push(mismatch(format!("{key:?} is not an attribute of parent {parent:?}")));
            }
        }
    }
}

fn check_typology(model: &ProcessModel, out: &mut Vec<Violation>) {
    let mut referenced: Vec<_> = Vec::new();
    for et in &model.entity_types {
        if let Some(lc) = model.lifecycle(&et.lifecycle) {
            if !referenced.iter().any(|r: &&super::LifecycleDef| r.name() == lc.name()) {
                referenced.push(lc);
            }
        }
    }

    match model.typology.time {
        TimeAxis::Limited => {
            for lc in &referenced {
                if lc.terminal().is_empty() {
                    out.push(Violation::LimitedWithoutTerminal { lifecycle: lc.name().to_string() });
                }
            }
        }
        TimeAxis::Cyclical => {
            if !referenced.iter().any(|lc| lc.cycles_through_initial()) {
                out.push(Violation::CyclicalWithoutCycle);
            }
        }
        TimeAxis::NotLimited => {}
    }

    let thresholds: Vec<_> = model.objectives.iter().filter(|o| o.kind() == ObjectiveKind::Threshold).collect();
    match model.typology.measurability {
        Measurability::NotMeasurable => {
            for o in thresholds {
                out.push(Violation::ThresholdOnNotMeasurable { objective: o.name.clone() });
            }
        }
        Measurability::Measurable => {
            if thresholds.is_empty() {
                out.push(Violation::MeasurableWithoutThreshold);
            }
        }
    }
}

fn check_activities(model: &ProcessModel, out: &mut Vec<Violation>) {
    let mut names = BTreeSet::new();
    for act in &model.activities {
        if !names.insert(act.name.as_str()) {
            out.push(Violation::DuplicateActivity { activity: act.name.clone() });
        }
        if !model.has_role(&act.required_role) {
            out.push(Violation::UnknownRole { activity: act.name.clone(), role: act.required_role.clone() });
        }
        if let Some(objective) = &act.objective {
            if model.objective(objective).is_none() {
                out.push(Violation::UnknownObjective { activity: act.name.clone(), objective: objective.clone() });
            }
        }
        if matches!(&act.transition.to, TransitionTarget::Outcomes(m) if m.is_empty()) {
            out.push(Violation::EmptyOutcomes { activity: act.name.clone() });
        }

        let Some(et) = model.entity_type(&act.entity_type) else {
            out.push(Violation::UnknownEntityType { activity: act.name.clone(), entity_type: act.entity_type.clone() });
            continue;
        };
        for input in &act.inputs {
            if et.attribute(input).is_none() {
                out.push(Violation::UndeclaredInput { activity: act.name.clone(), input: input.clone() });
            }
        }
        if let Some(lc) = model.lifecycle(&et.lifecycle) {
            for (from, to) in act.edges() {
                if !lc.allows(from, to) {
                    out.push(Violation::IllegalTransition {
                        activity: act.name.clone(),
                        from: from.to_string(),
                        to: to.to_string(),
                    });
                }
            }
        }

        if let Some(child) = &act.creates {
            let Some(child_type) = model.entity_type(child) else {
                out.push(Violation::UnknownEntityType { activity: act.name.clone(), entity_type: child.clone() });
                continue;
            };
            if let Some(parent) = &child_type.required_parent {
                if parent != &act.entity_type {
                    out.push(Violation::WrongParentCreator {
                        activity: act.name.clone(),
                        entity_type: child.clone(),
                        parent: parent.clone(),
                    });
                }
                if let Some(key) = &child_type.parent_key {
                    if !act.inputs.contains(key) {
                        out.push(Violation::MissingParentReference {
                            activity: act.name.clone(),
                            entity_type: child.clone(),
                            parent_key: key.clone(),
                        });
                    }
                }
            }
        }
    }
}
