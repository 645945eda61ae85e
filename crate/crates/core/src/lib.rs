//! Domain types and protocol state machines for the Local Read-Write (LRW)
//! neighborhood operation.
//!
//! An LRW operation is started by an initiator `p` on its neighborhood
//! `N(p)`. Every neighbor evaluates an evaluator `f` on its local variables,
//! stages the resulting write list `B` tentatively and answers with a
//! response value `r`. The initiator applies an aggregate predicate `g` to the
//! collected responses. Commit is time-triggered: a neighbor that receives no
//! abort before its commit timer runs out applies `B`.
//!
//! The state machines in [`protocol`] are pure: they consume events
//! (invocation, message arrival, timer expiry) and produce [`protocol::Action`]s.
//! Time, radio and timers are supplied by a driver such as the simulator.

pub mod error;
pub mod message;
pub mod protocol;
pub mod spec;
pub mod store;
pub mod types;

pub use error::{ConfigError, ProtocolError, SpecError, StoreError};
pub use message::{Body, Destination, InitBody, Message, MessageKind};
pub use spec::{validate_spec, Evaluation, LrwSpec, SpecId, SpecRegistry, MAX_PAYLOAD_BYTES};
pub use store::{TentativeWrite, VarStore};
pub use types::{NodeId, OpId, OpKey, Outcome, Role, TimerConfig, TimerId, TimerKind, Value, MS};
