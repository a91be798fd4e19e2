use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::compute::{drift_from_facts, in_state_from_facts, mean_from_facts, project, InstanceFacts};
use super::{IndicatorDef, IndicatorError, IndicatorSet, IndicatorSpec, Render};
use crate::ids::InstanceId;
use crate::time::Timestamp;
use crate::trace::TraceEvent;

/// A log seen as two consecutive slices, so staged events can be included
/// without copying the committed log.
#[derive(Debug, Clone, Copy)]
pub struct EventView<'a> {
    head: &'a [TraceEvent],
    tail: &'a [TraceEvent],
}

impl<'a> EventView<'a> {
    pub fn new(head: &'a [TraceEvent], tail: &'a [TraceEvent]) -> Self {
        EventView { head, tail }
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.head.iter().chain(self.tail.iter())
    }
}

impl<'a> From<&'a [TraceEvent]> for EventView<'a> {
    fn from(events: &'a [TraceEvent]) -> Self {
        EventView { head: events, tail: &[] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Green,
    Amber,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub at: Timestamp,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RenderedValue {
    Number { value: f64 },
    Undefined,
    Series { points: Vec<SeriesPoint> },
    Status { flag: Option<Flag>, value: Option<f64> },
    Text { text: String, value: Option<f64> },
}

impl RenderedValue {
    /// The underlying number, if defined.
    pub fn numeric(&self) -> Option<f64> {
        match self {
            RenderedValue::Number { value } => Some(*value),
            RenderedValue::Undefined => None,
            RenderedValue::Series { points } => points.last().and_then(|p| p.value),
            RenderedValue::Status { value, .. } | RenderedValue::Text { value, .. } => *value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValue {
    pub indicator: String,
    pub as_of: Timestamp,
    pub value: RenderedValue,
    pub sample_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Measure {
    value: Option<f64>,
    sample: u64,
}

impl Measure {
    fn count(n: u64) -> Self {
        Measure { value: Some(n as f64), sample: n }
    }
}

/// Per-evaluation cache of projections keyed by model name.
struct Context<'a> {
    view: EventView<'a>,
    as_of: Timestamp,
    facts: BTreeMap<String, BTreeMap<InstanceId, InstanceFacts>>,
}

impl Context<'_> {
    fn facts(&mut self, model: &str) -> &BTreeMap<InstanceId, InstanceFacts> {
        if !self.facts.contains_key(model) {
            let projected = project(self.view.iter(), model, self.as_of);
            self.facts.insert(model.to_string(), projected);
        }
        &self.facts[model]
    }
}

fn measure<'d>(
    def: &'d IndicatorDef,
    set: &'d IndicatorSet,
    ctx: &mut Context<'_>,
    stack: &mut Vec<&'d str>,
) -> Result<Measure, IndicatorError> {
    if stack.contains(&def.name.as_str()) {
        return Err(IndicatorError::CyclicRatio(def.name.clone()));
    }
    stack.push(&def.name);
    let family = def.family;
    let result = match &def.spec {
        IndicatorSpec::TerminalStateCount { model, state } => {
            let n =
                ctx.facts(model).values().filter(|f| f.in_population(family) && f.root_state() == state).count() as u64;
            Measure::count(n)
        }
        IndicatorSpec::CompletedCount { model } => {
            Measure::count(ctx.facts(model).values().filter(|f| f.is_completed()).count() as u64)
        }
        IndicatorSpec::AttestedCount { model, objective } => {
            let n =
                ctx.facts(model).values().filter(|f| f.in_population(family) && f.attested.contains(objective)).count()
                    as u64;
            Measure::count(n)
        }
        IndicatorSpec::MeanTransitionDuration { model, from_state, to_state } => {
            let m = mean_from_facts(ctx.facts(model), from_state, to_state, family);
            Measure { value: m.mean_ms, sample: m.sample_size }
        }
        IndicatorSpec::InStateCount { model, state } => Measure::count(in_state_from_facts(ctx.facts(model), state)),
        IndicatorSpec::OverdueCount { model, state, max_dwell_ms } => {
            let as_of = ctx.as_of;
            Measure::count(drift_from_facts(ctx.facts(model), state, *max_dwell_ms, as_of).len() as u64)
        }
        IndicatorSpec::Ratio { numerator, denominator } => {
            let num_def = set.get(numerator).ok_or_else(|| IndicatorError::UnknownIndicator(numerator.clone()))?;
            let den_def = set.get(denominator).ok_or_else(|| IndicatorError::UnknownIndicator(denominator.clone()))?;
            let num = measure(num_def, set, ctx, stack)?;
            let den = measure(den_def, set, ctx, stack)?;
            match (num.value, den.value) {
                (Some(n), Some(d)) if d != 0.0 => Measure { value: Some(n / d), sample: den.sample },
                _ => Measure { value: None, sample: 0 },
            }
        }
    };
    stack.pop();
    Ok(result)
}

fn flag(value: f64, green: f64, red: f64, higher_is_better: bool) -> Flag {
    if higher_is_better {
        if value >= green {
            Flag::Green
        } else if value < red {
            Flag::Red
        } else {
            Flag::Amber
        }
    } else if value <= green {
        Flag::Green
    } else if value > red {
        Flag::Red
    } else {
        Flag::Amber
    }
}

pub(crate) fn format_number(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "n/a".to_string(),
    }
}

/// Evaluates `def` over the events dated at or before `as_of`. Ratio
/// references are resolved in `set`.
pub fn evaluate_indicator<'a>(
    def: &IndicatorDef,
    set: &IndicatorSet,
    events: impl Into<EventView<'a>>,
    as_of: Timestamp,
) -> Result<IndicatorValue, IndicatorError> {
    let view = events.into();
    let mut ctx = Context { view, as_of, facts: BTreeMap::new() };
    let m = measure(def, set, &mut ctx, &mut Vec::new())?;

    let value = match &def.render {
        Render::Scalar | Render::Ratio => match m.value {
            Some(value) => RenderedValue::Number { value },
            None => RenderedValue::Undefined,
        },
        Render::StatusFlag { green, red, higher_is_better } => {
            RenderedValue::Status { flag: m.value.map(|v| flag(v, *green, *red, *higher_is_better)), value: m.value }
        }
        Render::Comment { template } => RenderedValue::Text {
            text: template
                .replace("{value}", &format_number(m.value))
                .replace("{n}", &m.sample.to_string())
                .replace("{name}", &def.name),
            value: m.value,
        },
        Render::TimeSeries => {
            let stamps: BTreeSet<Timestamp> = view.iter().map(|e| e.at).filter(|&t| t < as_of).collect();
            let mut points = Vec::with_capacity(stamps.len() + 1);
            for at in stamps {
                let mut inner = Context { view, as_of: at, facts: BTreeMap::new() };
                let p = measure(def, set, &mut inner, &mut Vec::new())?;
                points.push(SeriesPoint { at, value: p.value });
            }
            points.push(SeriesPoint { at: as_of, value: m.value });
            RenderedValue::Series { points }
        }
    };
    Ok(IndicatorValue { indicator: def.name.clone(), as_of, value, sample_size: m.sample })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::{Family, Perspective};

    #[test]
    fn flag_intervals() {
        assert_eq!(flag(0.5, 0.6, 0.3, true), Flag::Amber);
        assert_eq!(flag(0.6, 0.6, 0.3, true), Flag::Green);
        assert_eq!(flag(0.29, 0.6, 0.3, true), Flag::Red);
        assert_eq!(flag(0.0, 0.0, 3.0, false), Flag::Green);
        assert_eq!(flag(3.0, 0.0, 3.0, false), Flag::Amber);
        assert_eq!(flag(4.0, 0.0, 3.0, false), Flag::Red);
    }

    #[test]
    fn empty_log_gives_zero_counts_and_undefined_ratio() {
        let set = IndicatorSet::from_json(include_str!("../../../../indicators/rfq_default.json")).unwrap();
        let at = Timestamp::from_millis(0);
        let won = evaluate_indicator(set.get("won_count").unwrap(), &set, &[][..], at).unwrap();
        assert_eq!(won.value, RenderedValue::Number { value: 0.0 });
        let rate = evaluate_indicator(set.get("win_rate").unwrap(), &set, &[][..], at).unwrap();
        assert_eq!(rate.value, RenderedValue::Status { flag: None, value: None });
        assert_eq!(rate.sample_size, 0);
    }

    #[test]
    fn cyclic_definition_detected_during_evaluation() {
        // Bypass set validation to exercise the evaluator's own guard.
        let looped = IndicatorDef {
            name: "r".into(),
            family: Family::Performance,
            perspective: Perspective::Customer,
            spec: IndicatorSpec::Ratio { numerator: "r".into(), denominator: "r".into() },
            render: Render::Ratio,
        };
        let set = IndicatorSet { defs: vec![looped.clone()] };
        let err = evaluate_indicator(&looped, &set, &[][..], Timestamp::from_millis(0)).unwrap_err();
        assert_eq!(err, IndicatorError::CyclicRatio("r".into()));
    }
}
