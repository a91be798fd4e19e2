use super::{TraceError, TraceEvent};
use crate::engine::EngineState;
use crate::model::ModelRegistry;

/// Rebuilds engine state from a gapless event sequence. Any event that is
/// not a legal continuation (gap, unknown instance, transition outside the
/// lifecycle, clock regression) is reported as a corrupt log.
pub fn replay(registry: &ModelRegistry, events: &[TraceEvent]) -> Result<EngineState, TraceError> {
    replay_onto(EngineState::default(), registry, events)
}

/// Continues replay from an existing state, e.g. one loaded from a snapshot.
pub fn replay_onto(
    mut state: EngineState,
    registry: &ModelRegistry,
    events: &[TraceEvent],
) -> Result<EngineState, TraceError> {
    for e in events {
        state.apply(registry, e).map_err(|reason| TraceError::corrupt_seq(e.seq, reason))?;
    }
    Ok(state)
}
