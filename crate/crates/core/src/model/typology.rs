use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    Limited,
    NotLimited,
    Cyclical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// Frozen: no new version while instances run.
    Stable,
    /// New versions allowed; running instances stay on their version.
    Evolutionary,
    /// New versions allowed; running instances may be migrated.
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Genericity {
    SingleInstance,
    MultipleInstances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurability {
    Measurable,
    NotMeasurable,
}

/// Four-axis classification attached to every process model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcessTypology {
    pub time: TimeAxis,
    pub stability: Stability,
    pub genericity: Genericity,
    pub measurability: Measurability,
}

impl TimeAxis {
    pub const ALL: [TimeAxis; 3] = [TimeAxis::Limited, TimeAxis::NotLimited, TimeAxis::Cyclical];
}

impl Stability {
    pub const ALL: [Stability; 3] = [Stability::Stable, Stability::Evolutionary, Stability::Unstable];
}

impl Genericity {
    pub const ALL: [Genericity; 2] = [Genericity::SingleInstance, Genericity::MultipleInstances];
}

impl Measurability {
    pub const ALL: [Measurability; 2] = [Measurability::Measurable, Measurability::NotMeasurable];
}

impl ProcessTypology {
    /// Every combination of the four axes (3 x 3 x 2 x 2).
    pub fn all() -> impl Iterator<Item = ProcessTypology> {
        TimeAxis::ALL.into_iter().flat_map(|time| {
            Stability::ALL.into_iter().flat_map(move |stability| {
                Genericity::ALL.into_iter().flat_map(move |genericity| {
                    Measurability::ALL.into_iter().map(move |measurability| ProcessTypology {
                        time,
                        stability,
                        genericity,
                        measurability,
                    })
                })
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_six_combinations() {
        let all: Vec<_> = ProcessTypology::all().collect();
        assert_eq!(all.len(), 36);
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), 36);
    }

    #[test]
    fn snake_case_names() {
        let t: ProcessTypology = serde_json::from_str(
            r#"{"time":"not_limited","stability":"evolutionary","genericity":"single_instance","measurability":"not_measurable"}"#,
        )
        .unwrap();
        assert_eq!(t.time, TimeAxis::NotLimited);
        assert_eq!(t.genericity, Genericity::SingleInstance);
        assert!(serde_json::from_str::<TimeAxis>("\"forever\"").is_err());
    }
}
