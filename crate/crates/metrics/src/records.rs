use std::collections::BTreeMap;

use lrw_core::{NodeId, OpKey, Outcome};
use simnet::{Detail, RecordKind, Trace};

/// One completed LRW operation, reconstructed from a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct OpRecord {
    /// Index of the run the operation came from.
    pub trial: u64,
    pub op: OpKey,
    pub outcome: Outcome,
    pub invoke_us: u64,
    pub return_us: u64,
    /// Invoke to receipt of the last reply that settled the outcome: the
    /// final accept for Success, the final abort ack for Canceled. Failed
    /// operations use invoke to return.
    pub optimistic_us: u64,
    /// Broadcast frames the initiator sent for this operation, inits and aborts.
    pub broadcasts_sent: u32,
    pub neighbors_at_invoke: usize,
}

impl OpRecord {
    pub fn initiator(&self) -> NodeId {
        self.op.initiator
    }

    pub fn optimistic_ms(&self) -> f64 {
        self.optimistic_us as f64 / 1000.0
    }

    pub fn is_failed(&self) -> bool {
        self.outcome == Outcome::Failed
    }
}

/// Operations of one trace that returned, in invocation order.
pub fn op_records(trace: &Trace, trial: u64) -> Vec<OpRecord> {
    struct Open {
        invoke_us: u64,
        neighbors: usize,
        broadcasts: u32,
        last_accept: Option<u64>,
        last_abort_ack: Option<u64>,
        done: Option<(Outcome, u64)>,
    }
    let mut open: BTreeMap<OpKey, Open> = BTreeMap::new();
    let mut order = Vec::new();
    for r in trace {
        let Some(op) = r.op else { continue };
        match r.kind {
            RecordKind::Invoke => {
                let neighbors = match &r.detail {
                    Detail::Invitees(set) => set.len(),
                    _ => 0,
                };
                order.push(op);
                open.insert(
                    op,
                    Open {
                        invoke_us: r.time_us,
                        neighbors,
                        broadcasts: 0,
                        last_accept: None,
                        last_abort_ack: None,
                        done: None,
                    },
                );
            }
            RecordKind::Send if r.node == op.initiator && r.peer().is_none() => {
                if let Some(o) = open.get_mut(&op) {
                    o.broadcasts += 1;
                }
            }
            RecordKind::Deliver | RecordKind::Ack if r.node == op.initiator => {
                let Some(o) = open.get_mut(&op) else { continue };
                if o.done.is_some() {
                    continue;
                }
                match r.msg() {
                    Some("AcceptMsg") => o.last_accept = Some(r.time_us),
                    Some("AbortAck") => o.last_abort_ack = Some(r.time_us),
                    _ => {}
                }
            }
            RecordKind::Return => {
                if let (Some(o), Some(outcome)) = (open.get_mut(&op), r.outcome()) {
                    o.done = Some((outcome, r.time_us));
                }
            }
            _ => {}
        }
    }
    order
        .into_iter()
        .filter_map(|op| {
            let o = &open[&op];
            let (outcome, return_us) = o.done?;
            let settled = match outcome {
                Outcome::Success => o.last_accept,
                Outcome::Canceled => o.last_abort_ack,
                Outcome::Failed => None,
            };
            let end = settled.unwrap_or(return_us).min(return_us);
            Some(OpRecord {
                trial,
                op,
                outcome,
                invoke_us: o.invoke_us,
                return_us,
                optimistic_us: end - o.invoke_us,
                broadcasts_sent: o.broadcasts,
                neighbors_at_invoke: o.neighbors,
            })
        })
        .collect()
}

/// A set of operations invoked together.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRecord {
    pub series_id: u64,
    pub ops: Vec<OpRecord>,
    /// Largest optimistic duration among the members.
    pub duration_us: u64,
    /// At least one member failed.
    pub failed: bool,
}

impl SeriesRecord {
    pub fn new(series_id: u64, ops: Vec<OpRecord>) -> Self {
        let duration_us = ops.iter().map(|o| o.optimistic_us).max().unwrap_or(0);
        let failed = ops.iter().any(OpRecord::is_failed);
        SeriesRecord {
            series_id,
            ops,
            duration_us,
            failed,
        }
    }
}

/// Groups operations into one series per trial, ordered by trial.
pub fn series_by_trial(ops: &[OpRecord]) -> Vec<SeriesRecord> {
    let mut groups: BTreeMap<u64, Vec<OpRecord>> = BTreeMap::new();
    for op in ops {
        groups.entry(op.trial).or_default().push(op.clone());
    }
    groups
        .into_iter()
        .map(|(trial, ops)| SeriesRecord::new(trial, ops))
        .collect()
}
