//! Neighborhood operations that LRW is compared against, their message and
//! round costs, and consensus constructions with an exhaustive checker.

pub mod consensus;
pub mod cost;
pub mod ops;

pub use consensus::{
    check_consensus, explore_interleavings, solo_run, ConsensusNode, ConsensusViolation,
    ExploreError, Exploration, LrwConsensus, StepProtocol, UvwConsensus,
};
pub use cost::{cost_by_op, lrw_cost_audit, OpCost};
pub use ops::{
    read_all, run_ops, transact, write_all, OpResult, OpsBody, OpsError, OpsMsg, OpsNode,
    OpsRequest, OpsRun, OpsSetup, OpsTimers, ReadAllOutcome, TransactOutcome, WriteAllOutcome,
};
