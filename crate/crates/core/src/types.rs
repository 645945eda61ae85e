use std::fmt;

use crate::error::ConfigError;

/// Microseconds per millisecond. Durations are kept in microseconds.
pub const MS: u64 = 1_000;

/// Variable values. Every LRW variable is an integer.
pub type Value = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-initiator operation counter; strictly increasing across invocations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct OpId(pub u64);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Globally unique name of one operation: the initiator plus its op id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpKey {
    pub initiator: NodeId,
    pub op: OpId,
}

impl OpKey {
    pub fn new(initiator: NodeId, op: OpId) -> Self {
        OpKey { initiator, op }
    }
}

impl fmt::Display for OpKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.initiator, self.op)
    }
}

/// Result returned to the application that invoked an LRW operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    /// Every invitee accepted and the aggregate predicate held.
    Success,
    /// An abort was acknowledged by every invitee; nobody commits.
    Canceled,
    /// At least one invitee never acknowledged the abort. Commit decisions
    /// may diverge across the neighborhood.
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "Success",
            Outcome::Canceled => "Canceled",
            Outcome::Failed => "Failed",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerKind {
    /// Retransmission timer for the current phase's broadcast.
    Response,
    /// Phase deadline: moves an active operation to abort, or an abort to failure.
    Timeout,
    /// Time-triggered commit deadline.
    Commit,
}

impl TimerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TimerKind::Response => "Response",
            TimerKind::Timeout => "Timeout",
            TimerKind::Commit => "Commit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Initiator,
    Neighbor,
}

/// A timer is owned by one role of one node; a node acting as both initiator
/// and neighbor has two independent commit timers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerId {
    pub role: Role,
    pub kind: TimerKind,
}

impl TimerId {
    pub const fn new(role: Role, kind: TimerKind) -> Self {
        TimerId { role, kind }
    }
}

impl fmt::Display for TimerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::Initiator => "init",
            Role::Neighbor => "nbr",
        };
        write!(f, "{}.{}", role, self.kind.as_str())
    }
}

/// Durations of the three protocol timers. `None` means the timer never fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimerConfig {
    pub response_us: u64,
    pub timeout_us: Option<u64>,
    pub commit_us: Option<u64>,
}

impl TimerConfig {
    pub fn from_ms(response_ms: u64, timeout_ms: u64, commit_ms: u64) -> Self {
        TimerConfig {
            response_us: response_ms * MS,
            timeout_us: Some(timeout_ms * MS),
            commit_us: Some(commit_ms * MS),
        }
    }

    /// Commit must cover both the active and the abort phase, so it has to
    /// be at least twice the timeout. With an unbounded timeout only the
    /// active phase ever runs and the bound does not apply.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.response_us == 0 {
            return Err(ConfigError::ZeroResponse);
        }
        match (self.timeout_us, self.commit_us) {
            (Some(_), None) => Err(ConfigError::CommitInfinite),
            (Some(timeout_us), Some(commit_us)) if commit_us < 2 * timeout_us => {
                Err(ConfigError::CommitTooShort {
                    commit_us,
                    timeout_us,
                })
            }
            _ => Ok(()),
        }
    }
}

impl Default for TimerConfig {
    fn default() -> Self {
        TimerConfig::from_ms(40, 100, 200)
    }
}
