//! Lifecycle-bound business process engine.
//!
//! Process models declare entity types, their lifecycles and the activities
//! that move entities along them. The [`engine::Engine`] executes instances of
//! those models, every state change lands in an append-only trace log, and
//! indicators are computed from that log.

pub mod case_study;
pub mod engine;
pub mod ids;
pub mod indicators;
pub mod model;
pub mod scenario;
pub mod store;
pub mod time;
pub mod trace;

pub use engine::{Engine, EngineError, InstanceView, WorkItem};
pub use ids::{EntityId, InstanceId};
pub use model::{ModelRef, ModelRegistry, ProcessModel};
pub use time::Timestamp;
pub use trace::{EventFilter, EventKind, TraceEvent};
