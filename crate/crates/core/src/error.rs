use thiserror::Error;

use crate::types::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("payload of {bytes} bytes exceeds the {limit}-byte frame payload")]
    PayloadTooLarge { bytes: usize, limit: usize },
    #[error("evaluator returned {got} write values for {expected} write variables")]
    WriteArityMismatch { expected: usize, got: usize },
    #[error("unknown spec id {0}")]
    UnknownSpec(u16),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("no tentative write is pending")]
    NoPendingWrite,
    #[error("a tentative write is already pending")]
    WriteAlreadyPending,
    #[error("write list has {values} values for {vars} variables")]
    ArityMismatch { vars: usize, values: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("node {0} already has an operation in progress")]
    AlreadyActive(NodeId),
    #[error("node {0} has an empty neighborhood")]
    EmptyNeighborhood(NodeId),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("commit timer {commit_us}us is shorter than twice the timeout {timeout_us}us")]
    CommitTooShort { commit_us: u64, timeout_us: u64 },
    #[error("a finite timeout requires a finite commit timer")]
    CommitInfinite,
    #[error("response timer must be positive")]
    ZeroResponse,
    #[error("loss probability {0} is outside [0, 1]")]
    LossOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}
