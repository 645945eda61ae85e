//! Consensus on abstract atomic steps, with an exhaustive schedule explorer.
//!
//! Channels are lossless and steps never conflict here; each step is one
//! operation plus the local computation that follows it.

mod explore;
mod lrw;
mod uvw;

pub use explore::{check_consensus, explore_interleavings, solo_run, ConsensusViolation, ExploreError, Exploration};
pub use lrw::{LrwConsensus, LrwConsensusState, OMEGA};
pub use uvw::{Copies, UvwConsensus, UvwState};

use lrw_core::Value;

/// A node's input and write-once decision.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConsensusNode {
    pub input: Value,
    decision: Option<Value>,
    writes: u32,
}

impl ConsensusNode {
    pub fn new(input: Value) -> Self {
        ConsensusNode {
            input,
            decision: None,
            writes: 0,
        }
    }

    /// The first write sticks; later writes are counted, not applied.
    pub fn decide(&mut self, value: Value) {
        self.writes += 1;
        if self.decision.is_none() {
            self.decision = Some(value);
        }
    }

    pub fn decision(&self) -> Option<Value> {
        self.decision
    }

    pub fn write_count(&self) -> u32 {
        self.writes
    }
}

/// A protocol whose executions are interleavings of per-node atomic steps.
pub trait StepProtocol {
    type State: Clone;

    fn initial(&self) -> Self::State;
    fn node_count(&self) -> usize;
    /// Whether `node` has a step left to take.
    fn enabled(&self, state: &Self::State, node: usize) -> bool;
    fn step(&self, state: &mut Self::State, node: usize);
    fn consensus_nodes<'a>(&self, state: &'a Self::State) -> Vec<&'a ConsensusNode>;
}
