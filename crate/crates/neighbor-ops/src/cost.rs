//! Message and round accounting from traces.
//!
//! A round ends when some node that already transmitted in it transmits
//! again: every node in a neighborhood gets one send per round.

use std::collections::{BTreeMap, BTreeSet};

use lrw_core::{NodeId, OpKey};
use simnet::{RecordKind, Trace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpCost {
    /// Unicast and broadcast primitives, each counted once.
    pub messages: u32,
    pub rounds: u32,
}

impl OpCost {
    pub const fn new(messages: u32, rounds: u32) -> Self {
        OpCost { messages, rounds }
    }

    /// Cost of a sequence of transmitters, in send order.
    pub fn from_senders<I: IntoIterator<Item = NodeId>>(senders: I) -> Self {
        let mut cost = OpCost::default();
        let mut in_round = BTreeSet::new();
        for s in senders {
            if cost.rounds == 0 || !in_round.insert(s) {
                cost.rounds += 1;
                in_round.clear();
                in_round.insert(s);
            }
            cost.messages += 1;
        }
        cost
    }
}

/// Cost of every operation with at least one send, keyed by operation.
pub fn cost_by_op(trace: &Trace) -> BTreeMap<OpKey, OpCost> {
    let mut senders: BTreeMap<OpKey, Vec<NodeId>> = BTreeMap::new();
    for r in trace.of_kind(RecordKind::Send) {
        if let Some(op) = r.op {
            senders.entry(op).or_default().push(r.node);
        }
    }
    senders
        .into_iter()
        .map(|(op, s)| (op, OpCost::from_senders(s)))
        .collect()
}

/// Per-operation cost of an LRW trace.
pub fn lrw_cost_audit(trace: &Trace) -> BTreeMap<OpKey, OpCost> {
    cost_by_op(trace)
}
