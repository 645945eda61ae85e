use crate::message::{Destination, Message};
use crate::store::TentativeWrite;
use crate::types::{OpKey, Outcome, TimerKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Send {
        msg: Message,
        dest: Destination,
    },
    /// (Re)arm a timer; re-arming replaces any earlier deadline.
    StartTimer {
        kind: TimerKind,
        after_us: u64,
    },
    StopTimer(TimerKind),
    /// The neighbor staged a tentative write for `op`.
    Engage {
        op: OpKey,
    },
    /// The neighbor applied its tentative write for `op`.
    CommitWrites {
        op: OpKey,
        writes: TentativeWrite,
    },
    /// The neighbor dropped its tentative write for `op`.
    DiscardTentative {
        op: OpKey,
    },
    /// The initiator applies the operation to its own variables.
    CommitSelf {
        op: OpKey,
    },
    Return {
        op: OpKey,
        outcome: Outcome,
    },
    /// The event was dropped without a state change.
    Ignored(IgnoreReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IgnoreReason {
    /// Message for an operation other than the current one.
    StaleOp,
    /// Message kind not expected in the current mode.
    UnexpectedMode,
    /// Sender or receiver is not in the invitee list.
    NotInvited,
    /// Timer expiry with no matching armed timer.
    StrayTimer,
}

impl IgnoreReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IgnoreReason::StaleOp => "stale-op",
            IgnoreReason::UnexpectedMode => "unexpected-mode",
            IgnoreReason::NotInvited => "not-invited",
            IgnoreReason::StrayTimer => "stray-timer",
        }
    }
}
