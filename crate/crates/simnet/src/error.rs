use lrw_core::{ConfigError, NodeId, SpecError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(#[from] ConfigError),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("initiator {0} is busy")]
    InitiatorBusy(NodeId),
    #[error("event budget of {0} exhausted before quiescence")]
    EventBudgetExceeded(u64),
    #[error(transparent)]
    Spec(#[from] SpecError),
}
