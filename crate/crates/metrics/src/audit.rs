//! Safety audits over complete traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use lrw_core::{NodeId, OpKey, Outcome};
use simnet::{Detail, RecordKind, Trace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingReturn { op: OpKey },
    SuccessWithoutCommit { op: OpKey, node: NodeId },
    SuccessWithDiscard { op: OpKey, node: NodeId },
    CanceledWithCommit { op: OpKey, node: NodeId },
    OverlappingEngagement { node: NodeId, held: OpKey, new: OpKey, time_us: u64 },
    ResolveWithoutEngage { node: NodeId, op: OpKey, time_us: u64 },
    CommittedOverlap { node: NodeId, first: OpKey, second: OpKey },
    SerializationCycle { ops: Vec<OpKey> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingReturn { op } => write!(f, "{op}: invoked but never returned"),
            Violation::SuccessWithoutCommit { op, node } => {
                write!(f, "{op}: succeeded but invitee {node} did not commit")
            }
            Violation::SuccessWithDiscard { op, node } => {
                write!(f, "{op}: succeeded but {node} discarded")
            }
            Violation::CanceledWithCommit { op, node } => {
                write!(f, "{op}: canceled but {node} committed")
            }
            Violation::OverlappingEngagement { node, held, new, time_us } => {
                write!(f, "{node} engaged in {new} at {time_us} while holding {held}")
            }
            Violation::ResolveWithoutEngage { node, op, time_us } => {
                write!(f, "{node} resolved {op} at {time_us} without engaging")
            }
            Violation::CommittedOverlap { node, first, second } => {
                write!(f, "{node}: committed ops {first} and {second} overlap")
            }
            Violation::SerializationCycle { ops } => {
                write!(f, "serialization cycle through")?;
                for op in ops {
                    write!(f, " {op}")?;
                }
                Ok(())
            }
        }
    }
}

/// A Failed operation some engaged neighbors committed and others did not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub op: OpKey,
    pub committed: BTreeSet<NodeId>,
    pub not_committed: BTreeSet<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
    /// Expected under Failed; never a violation on their own.
    pub divergences: Vec<Divergence>,
}

#[derive(Default)]
struct OpFacts {
    invitees: BTreeSet<NodeId>,
    outcome: Option<Outcome>,
    engaged: BTreeSet<NodeId>,
    committed: BTreeSet<NodeId>,
    discarded: BTreeSet<NodeId>,
    self_committed: bool,
}

fn collect(trace: &Trace) -> BTreeMap<OpKey, OpFacts> {
    let mut ops: BTreeMap<OpKey, OpFacts> = BTreeMap::new();
    for r in trace {
        let Some(op) = r.op else { continue };
        match r.kind {
            RecordKind::Invoke => {
                let facts = ops.entry(op).or_default();
                if let Detail::Invitees(set) = &r.detail {
                    facts.invitees = set.clone();
                }
            }
            RecordKind::Return => ops.entry(op).or_default().outcome = r.outcome(),
            RecordKind::Engage => {
                ops.entry(op).or_default().engaged.insert(r.node);
            }
            RecordKind::Commit => {
                ops.entry(op).or_default().committed.insert(r.node);
            }
            RecordKind::Discard => {
                ops.entry(op).or_default().discarded.insert(r.node);
            }
            RecordKind::SelfCommit => ops.entry(op).or_default().self_committed = true,
            _ => {}
        }
    }
    ops
}

/// Checks commit decisions against each operation's outcome: Success means
/// every invitee commits, Canceled means nobody does.
pub fn audit_consistency(trace: &Trace) -> ConsistencyReport {
    let mut report = ConsistencyReport::default();
    for (op, facts) in collect(trace) {
        match facts.outcome {
            None => report.violations.push(Violation::MissingReturn { op }),
            Some(Outcome::Success) => {
                for &node in &facts.invitees {
                    if !facts.committed.contains(&node) {
                        report.violations.push(Violation::SuccessWithoutCommit { op, node });
                    }
                }
                for &node in &facts.discarded {
                    report.violations.push(Violation::SuccessWithDiscard { op, node });
                }
            }
            Some(Outcome::Canceled) => {
                let mut committed = facts.committed.clone();
                if facts.self_committed {
                    committed.insert(op.initiator);
                }
                for node in committed {
                    report.violations.push(Violation::CanceledWithCommit { op, node });
                }
            }
            Some(Outcome::Failed) => {
                let not_committed: BTreeSet<NodeId> =
                    facts.engaged.difference(&facts.committed).copied().collect();
                if !facts.committed.is_empty() && !not_committed.is_empty() {
                    report.divergences.push(Divergence {
                        op,
                        committed: facts.committed,
                        not_committed,
                    });
                }
            }
        }
    }
    report
}

/// Engagement intervals `[engage, resolve]` per neighbor, in trace order.
fn engagements(trace: &Trace, violations: &mut Vec<Violation>) -> BTreeMap<NodeId, Vec<(OpKey, u64, Option<u64>)>> {
    let mut held: BTreeMap<NodeId, (OpKey, u64)> = BTreeMap::new();
    let mut out: BTreeMap<NodeId, Vec<(OpKey, u64, Option<u64>)>> = BTreeMap::new();
    for r in trace {
        let Some(op) = r.op else { continue };
        match r.kind {
            RecordKind::Engage => {
                if let Some((prev, _)) = held.get(&r.node) {
                    violations.push(Violation::OverlappingEngagement {
                        node: r.node,
                        held: *prev,
                        new: op,
                        time_us: r.time_us,
                    });
                }
                held.insert(r.node, (op, r.time_us));
            }
            RecordKind::Commit | RecordKind::Discard => match held.get(&r.node) {
                Some((h, start)) if *h == op => {
                    out.entry(r.node).or_default().push((op, *start, Some(r.time_us)));
                    held.remove(&r.node);
                }
                _ => violations.push(Violation::ResolveWithoutEngage {
                    node: r.node,
                    op,
                    time_us: r.time_us,
                }),
            },
            _ => {}
        }
    }
    for (node, (op, start)) in held {
        out.entry(node).or_default().push((op, start, None));
    }
    out
}

/// Empty iff every neighbor's engagement intervals are pairwise disjoint and
/// every commit or discard closes an open engagement.
pub fn audit_single_engagement(trace: &Trace) -> Vec<Violation> {
    let mut violations = Vec::new();
    engagements(trace, &mut violations);
    violations
}

/// Checks successful operations: at each shared neighbor their engagement
/// intervals are disjoint, and the per-neighbor orders agree on a single
/// global order.
pub fn audit_serializability(trace: &Trace) -> Vec<Violation> {
    let mut ignored = Vec::new();
    let intervals = engagements(trace, &mut ignored);
    let succeeded: BTreeSet<OpKey> = collect(trace)
        .into_iter()
        .filter(|(_, f)| f.outcome == Some(Outcome::Success))
        .map(|(op, _)| op)
        .collect();

    let mut violations = Vec::new();
    let mut edges: BTreeMap<OpKey, BTreeSet<OpKey>> = BTreeMap::new();
    for (node, list) in intervals {
        let mut mine: Vec<(u64, u64, OpKey)> = list
            .into_iter()
            .filter(|(op, _, _)| succeeded.contains(op))
            .map(|(op, s, e)| (s, e.unwrap_or(u64::MAX), op))
            .collect();
        mine.sort();
        for pair in mine.windows(2) {
            let (_, end_a, a) = pair[0];
            let (start_b, _, b) = pair[1];
            if start_b < end_a {
                violations.push(Violation::CommittedOverlap { node, first: a, second: b });
            }
            edges.entry(a).or_default().insert(b);
        }
    }
    if let Some(cycle) = find_cycle(&edges) {
        violations.push(Violation::SerializationCycle { ops: cycle });
    }
    violations
}

fn find_cycle(edges: &BTreeMap<OpKey, BTreeSet<OpKey>>) -> Option<Vec<OpKey>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit(
        n: OpKey,
        edges: &BTreeMap<OpKey, BTreeSet<OpKey>>,
        marks: &mut BTreeMap<OpKey, Mark>,
        path: &mut Vec<OpKey>,
    ) -> Option<Vec<OpKey>> {
        marks.insert(n, Mark::Active);
        path.push(n);
        for &m in edges.get(&n).into_iter().flatten() {
            match marks.get(&m) {
                Some(Mark::Active) => {
                    let from = path.iter().position(|x| *x == m).expect("active is on path");
                    return Some(path[from..].to_vec());
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(c) = visit(m, edges, marks, path) {
                        return Some(c);
                    }
                }
            }
        }
        path.pop();
        marks.insert(n, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for &n in edges.keys() {
        if !marks.contains_key(&n) {
            if let Some(c) = visit(n, edges, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}
