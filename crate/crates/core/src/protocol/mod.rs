//! Initiator and neighbor state machines.
//!
//! Both machines are driven by three event types: invocation, message
//! arrival and timer expiry. Every handler takes the current time and returns
//! the actions the driver must carry out. Handlers never block and never
//! read a clock; identical `(state, event)` pairs always yield identical
//! `(state', actions)`.

mod action;
mod initiator;
mod neighbor;
mod node;

pub use action::{Action, IgnoreReason};
pub use initiator::{Initiator, InitiatorEvent, InitiatorMode, InvokeRequest};
pub use neighbor::{Neighbor, NeighborEvent, NeighborMode};
pub use node::{LrwNode, NodeAction};
