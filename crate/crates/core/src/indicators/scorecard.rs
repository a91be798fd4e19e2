use serde::{Deserialize, Serialize};

use super::{evaluate_indicator, EventView, Family, IndicatorSet, IndicatorValue, Perspective, RenderedValue};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorecardEntry {
    pub name: String,
    pub family: Family,
    pub perspective: Perspective,
    pub value: IndicatorValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorecardSection {
    pub perspective: Perspective,
    pub indicators: Vec<ScorecardEntry>,
}

/// Indicator values grouped by balanced-scorecard perspective. All four
/// perspectives are always present, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub as_of: Timestamp,
    pub perspectives: Vec<ScorecardSection>,
}

pub fn scorecard_report<'a>(set: &IndicatorSet, events: impl Into<EventView<'a>>, as_of: Timestamp) -> Scorecard {
    let view = events.into();
    let perspectives = Perspective::ALL
        .into_iter()
        .map(|perspective| ScorecardSection {
            perspective,
            indicators: set
                .defs()
                .iter()
                .filter(|d| d.perspective == perspective)
                .map(|def| ScorecardEntry {
                    name: def.name.clone(),
                    family: def.family,
                    perspective,
                    // A validated set cannot fail to evaluate.
                    value: evaluate_indicator(def, set, view, as_of).unwrap_or_else(|_| IndicatorValue {
                        indicator: def.name.clone(),
                        as_of,
                        value: RenderedValue::Undefined,
                        sample_size: 0,
                    }),
                })
                .collect(),
        })
        .collect();
    Scorecard { as_of, perspectives }
}

impl Scorecard {
    pub fn entries(&self) -> impl Iterator<Item = &ScorecardEntry> {
        self.perspectives.iter().flat_map(|s| s.indicators.iter())
    }

    pub fn section(&self, perspective: Perspective) -> &ScorecardSection {
        self.perspectives.iter().find(|s| s.perspective == perspective).expect("all perspectives present")
    }

    /// CSV with header `name,family,perspective,value,sample_size,as_of`.
    /// Undefined values are written as an empty field.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["name", "family", "perspective", "value", "sample_size", "as_of"])
            .expect("in-memory write");
        for entry in self.entries() {
            let value = entry.value.value.numeric().map(|v| format!("{v}")).unwrap_or_default();
            writer
                .write_record([
                    entry.name.as_str(),
                    entry.family.as_str(),
                    entry.perspective.as_str(),
                    value.as_str(),
                    entry.value.sample_size.to_string().as_str(),
                    entry.value.as_of.to_rfc3339().as_str(),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scorecard serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::{IndicatorDef, IndicatorSpec, Render};

    fn def(name: &str, perspective: Perspective) -> IndicatorDef {
        IndicatorDef {
            name: name.into(),
            family: Family::Performance,
            perspective,
            spec: IndicatorSpec::CompletedCount { model: "m".into() },
            render: Render::Scalar,
        }
    }

    #[test]
    fn empty_set_gives_four_empty_sections() {
        let card = scorecard_report(&IndicatorSet::default(), &[][..], Timestamp::from_millis(0));
        assert_eq!(card.perspectives.len(), 4);
        assert!(card.perspectives.iter().all(|s| s.indicators.is_empty()));
    }

    #[test]
    fn one_per_perspective() {
        let set = IndicatorSet::new(Perspective::ALL.iter().map(|p| def(p.as_str(), *p)).collect()).unwrap();
        let card = scorecard_report(&set, &[][..], Timestamp::from_millis(0));
        for section in &card.perspectives {
            assert_eq!(section.indicators.len(), 1);
            assert_eq!(section.indicators[0].name, section.perspective.as_str());
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let set = IndicatorSet::new(vec![def("done", Perspective::Customer)]).unwrap();
        let csv = scorecard_report(&set, &[][..], Timestamp::from_millis(0)).to_csv();
        assert_eq!(
            csv,
            "name,family,perspective,value,sample_size,as_of\ndone,performance,customer,0,0,1970-01-01T00:00:00.000Z\n"
        );
    }
}
