use crate::ids::InstanceId;
use crate::indicators::IndicatorError;
use crate::model::Violation;
use crate::time::Timestamp;
use crate::trace::TraceError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown model {name:?}{}", version.map(|v| format!(" version {v}")).unwrap_or_default())]
    UnknownModel { name: String, version: Option<u32> },
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("unknown objective {0:?}")]
    UnknownObjective(String),
    #[error("unknown indicator {0:?}")]
    UnknownIndicator(String),
    #[error("model {0:?} allows a single running instance and one is already running")]
    SingleInstanceViolation(String),
    #[error("activity {activity:?} needs its entity in {expected:?} but it is {}", actual.as_deref().unwrap_or("absent"))]
    WrongState { activity: String, expected: String, actual: Option<String> },
    #[error("actor {actor:?} lacks role {role:?} at expertise {min_expertise}")]
    Forbidden { actor: String, role: String, min_expertise: u32 },
    #[error("input {0:?} is not populated")]
    MissingInput(String),
    #[error("parameter {name:?}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("instance {0} is not running")]
    NotRunning(InstanceId),
    #[error("timestamp {at} precedes the last event {last} of instance {instance}")]
    ClockSkew { instance: InstanceId, last: Timestamp, at: Timestamp },
    #[error("objective {0:?} is a threshold objective and cannot be attested")]
    KindMismatch(String),
    #[error("model {0:?} is not unstable; instances cannot migrate")]
    StabilityForbids(String),
    #[error("state {state:?} of {entity_type} does not exist in the target version")]
    StateNotInTarget { entity_type: String, state: String },
    #[error("stable model {0:?} has live instances; new versions are refused")]
    FrozenModel(String),
    #[error("version {version} of {name:?} is not newer than the published version {latest}")]
    VersionExists { name: String, version: u32, latest: u32 },
    #[error("model failed validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<Violation>),
    #[error("ratio indicator {0:?} references itself")]
    CyclicRatio(String),
    #[error("invalid indicator definition {name:?}: {reason}")]
    InvalidIndicator { name: String, reason: String },
    #[error("storage failure: {0}")]
    StorageFailure(String),
}

impl EngineError {
    /// Machine-readable code, equal to the variant name.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::UnknownModel { .. } => "UnknownModel",
            EngineError::UnknownInstance(_) => "UnknownInstance",
            EngineError::UnknownActivity(_) => "UnknownActivity",
            EngineError::UnknownObjective(_) => "UnknownObjective",
            EngineError::UnknownIndicator(_) => "UnknownIndicator",
            EngineError::SingleInstanceViolation(_) => "SingleInstanceViolation",
            EngineError::WrongState { .. } => "WrongState",
            EngineError::Forbidden { .. } => "Forbidden",
            EngineError::MissingInput(_) => "MissingInput",
            EngineError::InvalidParameter { .. } => "InvalidParameter",
            EngineError::NotRunning(_) => "NotRunning",
            EngineError::ClockSkew { .. } => "ClockSkew",
            EngineError::KindMismatch(_) => "KindMismatch",
            EngineError::StabilityForbids(_) => "StabilityForbids",
            EngineError::StateNotInTarget { .. } => "StateNotInTarget",
            EngineError::FrozenModel(_) => "FrozenModel",
            EngineError::VersionExists { .. } => "VersionExists",
            EngineError::ValidationFailed(_) => "ValidationFailed",
            EngineError::CyclicRatio(_) => "CyclicRatio",
            EngineError::InvalidIndicator { .. } => "InvalidIndicator",
            EngineError::StorageFailure(_) => "StorageFailure",
        }
    }

    /// One sample of every variant, for exhaustive mapping checks.
    pub fn samples() -> Vec<EngineError> {
        let i = InstanceId::new("I-000001");
        let t = Timestamp::from_millis(0);
        vec![
            EngineError::UnknownModel { name: "m".into(), version: None },
            EngineError::UnknownInstance(i.clone()),
            EngineError::UnknownActivity("a".into()),
            EngineError::UnknownObjective("o".into()),
            EngineError::UnknownIndicator("k".into()),
            EngineError::SingleInstanceViolation("m".into()),
            EngineError::WrongState { activity: "a".into(), expected: "S".into(), actual: None },
            EngineError::Forbidden { actor: "x".into(), role: "r".into(), min_expertise: 1 },
            EngineError::MissingInput("in".into()),
            EngineError::InvalidParameter { name: "p".into(), reason: "bad".into() },
            EngineError::NotRunning(i.clone()),
            EngineError::ClockSkew { instance: i, last: t, at: t },
            EngineError::KindMismatch("o".into()),
            EngineError::StabilityForbids("m".into()),
            EngineError::StateNotInTarget { entity_type: "T".into(), state: "S".into() },
            EngineError::FrozenModel("m".into()),
            EngineError::VersionExists { name: "m".into(), version: 1, latest: 1 },
            EngineError::ValidationFailed(Vec::new()),
            EngineError::CyclicRatio("k".into()),
            EngineError::InvalidIndicator { name: "k".into(), reason: "r".into() },
            EngineError::StorageFailure("disk".into()),
        ]
    }
}

impl From<TraceError> for EngineError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::ClockSkew { instance, last, at } => EngineError::ClockSkew { instance, last, at },
            other => EngineError::StorageFailure(other.to_string()),
        }
    }
}

impl From<IndicatorError> for EngineError {
    fn from(e: IndicatorError) -> Self {
        match e {
            IndicatorError::UnknownIndicator(n) => EngineError::UnknownIndicator(n),
            IndicatorError::CyclicRatio(n) => EngineError::CyclicRatio(n),
            IndicatorError::Invalid { name, reason } => EngineError::InvalidIndicator { name, reason },
        }
    }
}
