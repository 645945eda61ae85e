//! Deterministic discrete-event simulation of a wireless neighborhood.
//!
//! Time is in µs. Every run draws from one seeded stream, so a trace is a
//! pure function of its scenario.

pub mod engine;
pub mod error;
pub mod lrw;
pub mod queue;
pub mod radio;
pub mod rng;
pub mod topology;
pub mod trace;

pub use engine::{
    Behavior, DropFilter, Effect, Engine, LinkAttempt, NodeIo, Primitive, RunStats, SimMessage,
    DEFAULT_MAX_EVENTS,
};
pub use error::SimError;
pub use lrw::{run_lrw, run_scenario, LrwRun, LrwScenario, LrwSimNode};
pub use queue::EventQueue;
pub use radio::RadioModel;
pub use rng::{substream, SimRng};
pub use topology::Topology;
pub use trace::{Detail, Record, RecordKind, Trace, TRACE_HEADER};
