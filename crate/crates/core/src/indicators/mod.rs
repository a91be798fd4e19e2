//! Indicators computed from the trace.
//!
//! Performance indicators look back at finished work: they only read events of
//! instances completed by `as_of`. Process indicators look at the live
//! situation (running instances, dwell times) and are what drift detection is
//! built on. Every indicator belongs to one balanced-scorecard perspective.
//!
//! All computations are pure functions of the events dated at or before
//! `as_of` plus the definition; undefined results carry `sample_size == 0`
//! rather than NaN.

mod compute;
mod evaluate;
mod scorecard;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use compute::{
    count_by_terminal_state, detect_drift, mean_transition_duration, win_rate, Drift, MeanDuration, Ratio,
};
pub use evaluate::{evaluate_indicator, EventView, Flag, IndicatorValue, RenderedValue, SeriesPoint};
pub use scorecard::{scorecard_report, Scorecard, ScorecardEntry, ScorecardSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Performance,
    Process,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Performance => "performance",
            Family::Process => "process",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    Financial,
    Customer,
    InternalProcess,
    Learning,
}

impl Perspective {
    pub const ALL: [Perspective; 4] =
        [Perspective::Financial, Perspective::Customer, Perspective::InternalProcess, Perspective::Learning];

    pub fn as_str(self) -> &'static str {
        match self {
            Perspective::Financial => "financial",
            Perspective::Customer => "customer",
            Perspective::InternalProcess => "internal_process",
            Perspective::Learning => "learning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorSpec {
    /// Instances whose root entity sits in `state`.
    TerminalStateCount { model: String, state: String },
    /// `numerator / denominator`, both names of other indicators.
    Ratio { numerator: String, denominator: String },
    /// Mean time from entering `from_state` to the next entry into `to_state`.
    MeanTransitionDuration { model: String, from_state: String, to_state: String },
    /// Running instances with an entity currently in `state`.
    InStateCount { model: String, state: String },
    /// Running instances whose dwell in `state` exceeds `max_dwell_ms`.
    OverdueCount { model: String, state: String, max_dwell_ms: i64 },
    /// Instances completed by `as_of`.
    CompletedCount { model: String },
    /// Instances with at least one attestation of `objective`.
    AttestedCount { model: String, objective: String },
}

fn higher_is_better() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Render {
    #[default]
    Scalar,
    Ratio,
    TimeSeries,
    /// Green/amber/red. With `higher_is_better`, green means `value >= green`
    /// and red means `value < red`; otherwise green is `value <= green` and
    /// red is `value > red`. Everything in between is amber.
    StatusFlag {
        green: f64,
        red: f64,
        #[serde(default = "higher_is_better")]
        higher_is_better: bool,
    },
    /// Sentence with `{value}`, `{n}` and `{name}` placeholders.
    Comment {
        template: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorDef {
    pub name: String,
    pub family: Family,
    pub perspective: Perspective,
    pub spec: IndicatorSpec,
    #[serde(default)]
    pub render: Render,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndicatorError {
    #[error("unknown indicator {0:?}")]
    UnknownIndicator(String),
    #[error("ratio indicator {0:?} references itself")]
    CyclicRatio(String),
    #[error("invalid indicator {name:?}: {reason}")]
    Invalid { name: String, reason: String },
}

/// A validated, ordered collection of indicator definitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorSet {
    defs: Vec<IndicatorDef>,
}

impl IndicatorSet {
    pub fn new(defs: Vec<IndicatorDef>) -> Result<Self, IndicatorError> {
        let set = IndicatorSet { defs };
        set.check()?;
        Ok(set)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let defs: Vec<IndicatorDef> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        IndicatorSet::new(defs).map_err(|e| e.to_string())
    }

    /// Adds or replaces definitions by name, keeping first-declared order.
    pub fn merged(&self, defs: Vec<IndicatorDef>) -> Result<Self, IndicatorError> {
        let mut all = self.defs.clone();
        for def in defs {
            match all.iter_mut().find(|d| d.name == def.name) {
                Some(slot) => *slot = def,
                None => all.push(def),
            }
        }
        IndicatorSet::new(all)
    }

    pub fn get(&self, name: &str) -> Option<&IndicatorDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn defs(&self) -> &[IndicatorDef] {
        &self.defs
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    fn check(&self) -> Result<(), IndicatorError> {
        let mut names = BTreeSet::new();
        for def in &self.defs {
            if !names.insert(def.name.as_str()) {
                return Err(invalid(def, "declared twice"));
            }
        }
        for def in &self.defs {
            match &def.spec {
                IndicatorSpec::Ratio { numerator, denominator } => {
                    for part in [numerator, denominator] {
                        if part == &def.name {
                            return Err(IndicatorError::CyclicRatio(def.name.clone()));
                        }
                        if self.get(part).is_none() {
                            return Err(IndicatorError::UnknownIndicator(part.clone()));
                        }
                    }
                }
                IndicatorSpec::InStateCount { .. } | IndicatorSpec::OverdueCount { .. }
                    if def.family == Family::Performance =>
                {
                    return Err(invalid(def, "reads running instances, so it must be a process indicator"));
                }
                IndicatorSpec::OverdueCount { max_dwell_ms, .. } if *max_dwell_ms < 0 => {
                    return Err(invalid(def, "max_dwell_ms must not be negative"));
                }
                _ => {}
            }
            if let Render::StatusFlag { green, red, higher_is_better } = def.render {
                let ordered = if higher_is_better { red <= green } else { green <= red };
                if !ordered || !green.is_finite() || !red.is_finite() {
                    return Err(invalid(def, "status bounds out of order"));
                }
            }
        }
        // Ratio references form a graph; reject any cycle.
        let edges: BTreeMap<&str, Vec<&str>> = self
            .defs
            .iter()
            .map(|d| {
                let refs = match &d.spec {
                    IndicatorSpec::Ratio { numerator, denominator } => vec![numerator.as_str(), denominator.as_str()],
                    _ => Vec::new(),
                };
                (d.name.as_str(), refs)
            })
            .collect();
        for def in &self.defs {
            let mut stack = vec![def.name.as_str()];
            if has_cycle(&edges, &mut stack) {
                return Err(IndicatorError::CyclicRatio(def.name.clone()));
            }
        }
        Ok(())
    }
}

fn has_cycle<'a>(edges: &BTreeMap<&'a str, Vec<&'a str>>, stack: &mut Vec<&'a str>) -> bool {
    let node = *stack.last().expect("non-empty");
    for &next in edges.get(node).into_iter().flatten() {
        if stack.contains(&next) {
            return true;
        }
        stack.push(next);
        if has_cycle(edges, stack) {
            return true;
        }
        stack.pop();
    }
    false
}

fn invalid(def: &IndicatorDef, reason: &str) -> IndicatorError {
    IndicatorError::Invalid { name: def.name.clone(), reason: reason.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(name: &str) -> IndicatorDef {
        IndicatorDef {
            name: name.into(),
            family: Family::Performance,
            perspective: Perspective::Customer,
            spec: IndicatorSpec::CompletedCount { model: "rfq".into() },
            render: Render::Scalar,
        }
    }

    fn ratio(name: &str, num: &str, den: &str) -> IndicatorDef {
        IndicatorDef { spec: IndicatorSpec::Ratio { numerator: num.into(), denominator: den.into() }, ..count(name) }
    }

    #[test]
    fn self_referencing_ratio_is_cyclic() {
        let err = IndicatorSet::new(vec![count("n"), ratio("r", "n", "r")]).unwrap_err();
        assert_eq!(err, IndicatorError::CyclicRatio("r".into()));
    }

    #[test]
    fn indirect_cycle_is_cyclic() {
        let err = IndicatorSet::new(vec![ratio("a", "b", "b"), ratio("b", "a", "a")]).unwrap_err();
        assert!(matches!(err, IndicatorError::CyclicRatio(_)));
    }

    #[test]
    fn unknown_reference() {
        let err = IndicatorSet::new(vec![ratio("r", "n", "d")]).unwrap_err();
        assert_eq!(err, IndicatorError::UnknownIndicator("n".into()));
    }

    #[test]
    fn running_instance_specs_must_be_process_family() {
        let def = IndicatorDef {
            spec: IndicatorSpec::InStateCount { model: "rfq".into(), state: "UnderAnalysis".into() },
            ..count("x")
        };
        assert!(matches!(IndicatorSet::new(vec![def]), Err(IndicatorError::Invalid { .. })));
    }

    #[test]
    fn shipped_pack_parses() {
        let set = IndicatorSet::from_json(include_str!("../../../../indicators/rfq_default.json")).unwrap();
        assert!(set.get("win_rate").is_some());
        assert_eq!(set.get("overdue_analysis").unwrap().family, Family::Process);
    }

    #[test]
    fn merge_replaces_by_name() {
        let set = IndicatorSet::new(vec![count("a")]).unwrap();
        let mut b = count("a");
        b.perspective = Perspective::Learning;
        let merged = set.merged(vec![b, count("c")]).unwrap();
        assert_eq!(merged.defs().len(), 2);
        assert_eq!(merged.get("a").unwrap().perspective, Perspective::Learning);
    }
}
