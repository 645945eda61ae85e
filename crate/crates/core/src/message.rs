//! The five LRW message types.

use std::collections::BTreeSet;
use std::fmt;

use crate::spec::SpecId;
use crate::types::{NodeId, OpId, OpKey, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    InitMsg,
    AcceptMsg,
    RejectMsg,
    AbortMsg,
    AbortAck,
}

impl MessageKind {
    pub const ALL: [MessageKind; 5] = [
        MessageKind::InitMsg,
        MessageKind::AcceptMsg,
        MessageKind::RejectMsg,
        MessageKind::AbortMsg,
        MessageKind::AbortAck,
    ];

    /// Init and abort go to the whole neighborhood; replies go to the initiator.
    pub fn is_broadcast(self) -> bool {
        matches!(self, MessageKind::InitMsg | MessageKind::AbortMsg)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::InitMsg => "InitMsg",
            MessageKind::AcceptMsg => "AcceptMsg",
            MessageKind::RejectMsg => "RejectMsg",
            MessageKind::AbortMsg => "AbortMsg",
            MessageKind::AbortAck => "AbortAck",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Destination {
    Broadcast,
    Unicast(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitBody {
    /// Time left on the initiator's commit timer when this copy was sent.
    /// The receiver starts its own commit countdown from this value.
    pub commit_remaining_us: Option<u64>,
    /// Neighbors that have not yet accepted. The first broadcast names the
    /// whole neighborhood; rebroadcasts only the stragglers.
    pub invitees: BTreeSet<NodeId>,
    pub spec: SpecId,
    /// Arguments handed to the evaluator at each neighbor.
    pub args: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Init(InitBody),
    Accept { r: Value },
    Reject,
    Abort,
    AbortAck,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub initiator: NodeId,
    pub sender: NodeId,
    pub op: OpId,
    pub body: Body,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self.body {
            Body::Init(_) => MessageKind::InitMsg,
            Body::Accept { .. } => MessageKind::AcceptMsg,
            Body::Reject => MessageKind::RejectMsg,
            Body::Abort => MessageKind::AbortMsg,
            Body::AbortAck => MessageKind::AbortAck,
        }
    }

    pub fn key(&self) -> OpKey {
        OpKey::new(self.initiator, self.op)
    }

    /// The destination mandated by the message kind.
    pub fn destination(&self) -> Destination {
        if self.kind().is_broadcast() {
            Destination::Broadcast
        } else {
            Destination::Unicast(self.initiator)
        }
    }
}
