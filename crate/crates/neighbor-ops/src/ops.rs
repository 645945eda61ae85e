//! Read-all, write-all and transact as simulated neighborhood operations.
//!
//! Every node holds one variable. Transact participants lock on the read
//! broadcast, report a conflict if already locked, and commit on their own
//! timer unless a cancel arrives first.

use std::collections::{BTreeMap, BTreeSet};

use lrw_core::{NodeId, OpId, OpKey, Outcome, Role, TimerId, TimerKind, Value, MS};
use simnet::{
    substream, Behavior, Detail, Engine, NodeIo, RadioModel, RecordKind, SimError, SimMessage,
    Topology, Trace,
};
use thiserror::Error;

use crate::cost::{cost_by_op, OpCost};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpsError {
    #[error("operation timed out")]
    Timeout,
    #[error("conflict with a concurrent transaction")]
    Conflict,
    #[error("{0} is not a neighbor of the initiator")]
    NotNeighbor(NodeId),
    #[error("operation never returned")]
    NoResult,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpsBody {
    ReadReq,
    ReadResp { value: Value },
    Write { value: Value, ack: bool },
    WriteAck,
    TxRead { read_set: BTreeSet<NodeId>, write_set: BTreeSet<NodeId> },
    TxReadResp { value: Value },
    TxConflict,
    TxWrite { value: Value },
    TxWriteAck,
    TxCancel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpsMsg {
    pub initiator: NodeId,
    pub op: OpId,
    pub body: OpsBody,
}

impl OpsMsg {
    pub fn key(&self) -> OpKey {
        OpKey::new(self.initiator, self.op)
    }
}

impl SimMessage for OpsMsg {
    fn label(&self) -> &'static str {
        match self.body {
            OpsBody::ReadReq => "ReadReq",
            OpsBody::ReadResp { .. } => "ReadResp",
            OpsBody::Write { .. } => "Write",
            OpsBody::WriteAck => "WriteAck",
            OpsBody::TxRead { .. } => "TxRead",
            OpsBody::TxReadResp { .. } => "TxReadResp",
            OpsBody::TxConflict => "TxConflict",
            OpsBody::TxWrite { .. } => "TxWrite",
            OpsBody::TxWriteAck => "TxWriteAck",
            OpsBody::TxCancel => "TxCancel",
        }
    }

    fn op(&self) -> Option<OpKey> {
        Some(self.key())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpsRequest {
    ReadAll,
    WriteAll {
        value: Value,
        acked: bool,
    },
    Transact {
        read_set: BTreeSet<NodeId>,
        write_set: BTreeSet<NodeId>,
        value: Value,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpsTimers {
    /// Initiator gives up after this long.
    pub timeout_us: u64,
    /// Transact participants commit this long after locking.
    pub commit_us: u64,
}

impl Default for OpsTimers {
    fn default() -> Self {
        OpsTimers {
            timeout_us: 200 * MS,
            commit_us: 400 * MS,
        }
    }
}

/// What an initiator got back.
#[derive(Clone, Debug, PartialEq)]
pub struct OpResult {
    pub op: OpKey,
    pub outcome: Outcome,
    pub error: Option<OpsError>,
    /// Values read, by neighbor.
    pub values: BTreeMap<NodeId, Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TxPhase {
    Reading,
    Writing,
}

#[derive(Clone, Debug)]
enum Pending {
    ReadAll,
    WriteAll,
    Transact {
        write_set: BTreeSet<NodeId>,
        value: Value,
        phase: TxPhase,
    },
}

#[derive(Clone, Debug)]
struct Active {
    op: OpKey,
    pending: Pending,
    waiting: BTreeSet<NodeId>,
    values: BTreeMap<NodeId, Value>,
}

#[derive(Clone, Debug)]
struct Lock {
    op: OpKey,
    writer: bool,
    staged: Option<Value>,
}

const TIMEOUT: TimerId = TimerId {
    role: Role::Initiator,
    kind: TimerKind::Timeout,
};
const COMMIT: TimerId = TimerId {
    role: Role::Neighbor,
    kind: TimerKind::Commit,
};

#[derive(Clone, Debug)]
pub struct OpsNode {
    id: NodeId,
    value: Value,
    lock: Option<Lock>,
    next_op: u64,
    active: Option<Active>,
    timers: OpsTimers,
    results: Vec<OpResult>,
}

impl OpsNode {
    pub fn new(id: NodeId, value: Value, timers: OpsTimers) -> Self {
        OpsNode {
            id,
            value,
            lock: None,
            next_op: 0,
            active: None,
            timers,
            results: Vec::new(),
        }
    }

    pub fn value(&self) -> Value {
        self.value
    }

    pub fn results(&self) -> &[OpResult] {
        &self.results
    }

    fn msg(&self, op: OpKey, body: OpsBody) -> OpsMsg {
        OpsMsg {
            initiator: op.initiator,
            op: op.op,
            body,
        }
    }

    fn finish(&mut self, outcome: Outcome, error: Option<OpsError>, io: &mut NodeIo<OpsMsg>) {
        let Some(active) = self.active.take() else { return };
        io.stop_timer(TIMEOUT);
        io.note(RecordKind::Return, Some(active.op), Detail::Outcome(outcome));
        self.results.push(OpResult {
            op: active.op,
            outcome,
            error,
            values: active.values,
        });
    }

    fn cancel(&mut self, outcome: Outcome, error: OpsError, io: &mut NodeIo<OpsMsg>) {
        if let Some(active) = &self.active {
            io.broadcast(self.msg(active.op, OpsBody::TxCancel));
        }
        self.finish(outcome, Some(error), io);
    }

    fn start_write_phase(&mut self, io: &mut NodeIo<OpsMsg>) {
        let Some(active) = self.active.as_mut() else { return };
        let Pending::Transact {
            write_set,
            value,
            phase,
        } = &mut active.pending
        else {
            return;
        };
        *phase = TxPhase::Writing;
        active.waiting = write_set.clone();
        let body = OpsBody::TxWrite { value: *value };
        let op = active.op;
        io.broadcast(self.msg(op, body));
        if self.active.as_ref().is_some_and(|a| a.waiting.is_empty()) {
            self.finish(Outcome::Success, None, io);
        }
    }

    fn as_participant(&mut self, msg: &OpsMsg, io: &mut NodeIo<OpsMsg>) {
        let key = msg.key();
        let to = msg.initiator;
        match &msg.body {
            OpsBody::ReadReq => io.unicast(to, self.msg(key, OpsBody::ReadResp { value: self.value })),
            OpsBody::Write { value, ack } => {
                self.value = *value;
                io.note(RecordKind::Commit, Some(key), Detail::None);
                if *ack {
                    io.unicast(to, self.msg(key, OpsBody::WriteAck));
                }
            }
            OpsBody::TxRead { read_set, write_set } => {
                let reader = read_set.contains(&self.id);
                let writer = write_set.contains(&self.id);
                if !reader && !writer {
                    return;
                }
                match &self.lock {
                    Some(lock) if lock.op != key => {
                        io.unicast(to, self.msg(key, OpsBody::TxConflict));
                        return;
                    }
                    Some(_) => {}
                    None => {
                        self.lock = Some(Lock {
                            op: key,
                            writer,
                            staged: None,
                        });
                        io.note(RecordKind::Engage, Some(key), Detail::None);
                        io.start_timer(COMMIT, self.timers.commit_us, Some(key));
                    }
                }
                if reader {
                    io.unicast(to, self.msg(key, OpsBody::TxReadResp { value: self.value }));
                }
            }
            OpsBody::TxWrite { value } => {
                if let Some(lock) = self.lock.as_mut().filter(|l| l.op == key && l.writer) {
                    lock.staged = Some(*value);
                    io.unicast(to, self.msg(key, OpsBody::TxWriteAck));
                }
            }
            OpsBody::TxCancel if self.lock.as_ref().is_some_and(|l| l.op == key) => {
                self.lock = None;
                io.stop_timer(COMMIT);
                io.note(RecordKind::Discard, Some(key), Detail::None);
            }
            _ => {}
        }
    }

    fn as_initiator(&mut self, from: NodeId, msg: &OpsMsg, io: &mut NodeIo<OpsMsg>) {
        let Some(active) = self.active.as_mut().filter(|a| a.op == msg.key()) else {
            io.note(RecordKind::Ignore, Some(msg.key()), Detail::Reason("stale-op"));
            return;
        };
        match (&msg.body, &active.pending) {
            (OpsBody::ReadResp { value }, Pending::ReadAll)
            | (
                OpsBody::TxReadResp { value },
                Pending::Transact {
                    phase: TxPhase::Reading,
                    ..
                },
            ) => {
                if active.waiting.remove(&from) {
                    active.values.insert(from, *value);
                }
            }
            (OpsBody::WriteAck, Pending::WriteAll)
            | (
                OpsBody::TxWriteAck,
                Pending::Transact {
                    phase: TxPhase::Writing,
                    ..
                },
            ) => {
                active.waiting.remove(&from);
            }
            (OpsBody::TxConflict, Pending::Transact { .. }) => {
                return self.cancel(Outcome::Canceled, OpsError::Conflict, io);
            }
            _ => return,
        }
        if !active.waiting.is_empty() {
            return;
        }
        match active.pending {
            Pending::Transact {
                phase: TxPhase::Reading,
                ..
            } => self.start_write_phase(io),
            _ => self.finish(Outcome::Success, None, io),
        }
    }
}

impl Behavior for OpsNode {
    type Msg = OpsMsg;
    type Request = OpsRequest;

    fn invoke(&mut self, request: OpsRequest, io: &mut NodeIo<OpsMsg>) -> Result<(), &'static str> {
        if self.active.is_some() {
            return Err("already-active");
        }
        let hood = io.neighbors().clone();
        if let OpsRequest::Transact {
            read_set,
            write_set,
            ..
        } = &request
        {
            if !read_set.is_subset(&hood) || !write_set.is_subset(&hood) {
                return Err("not-neighbor");
            }
        }
        self.next_op += 1;
        let op = OpKey::new(self.id, OpId(self.next_op));
        io.note(RecordKind::Invoke, Some(op), Detail::Invitees(hood.clone()));
        io.start_timer(TIMEOUT, self.timers.timeout_us, Some(op));
        let (pending, waiting, body) = match request {
            OpsRequest::ReadAll => (Pending::ReadAll, hood, OpsBody::ReadReq),
            OpsRequest::WriteAll { value, acked } => {
                let waiting = if acked { hood } else { BTreeSet::new() };
                (Pending::WriteAll, waiting, OpsBody::Write { value, ack: acked })
            }
            OpsRequest::Transact {
                read_set,
                write_set,
                value,
            } => (
                Pending::Transact {
                    write_set: write_set.clone(),
                    value,
                    phase: TxPhase::Reading,
                },
                read_set.clone(),
                OpsBody::TxRead { read_set, write_set },
            ),
        };
        let reading_done = waiting.is_empty();
        self.active = Some(Active {
            op,
            pending,
            waiting,
            values: BTreeMap::new(),
        });
        io.broadcast(self.msg(op, body));
        if reading_done {
            match self.active.as_ref().map(|a| &a.pending) {
                Some(Pending::Transact { .. }) => self.start_write_phase(io),
                _ => self.finish(Outcome::Success, None, io),
            }
        }
        Ok(())
    }

    fn on_message(&mut self, from: NodeId, msg: &OpsMsg, io: &mut NodeIo<OpsMsg>) {
        let reply = matches!(
            msg.body,
            OpsBody::ReadResp { .. }
                | OpsBody::WriteAck
                | OpsBody::TxReadResp { .. }
                | OpsBody::TxConflict
                | OpsBody::TxWriteAck
        );
        if reply {
            if msg.initiator == self.id {
                self.as_initiator(from, msg, io);
            }
        } else if msg.initiator != self.id {
            self.as_participant(msg, io);
        }
    }

    fn on_timer(&mut self, timer: TimerId, io: &mut NodeIo<OpsMsg>) {
        if timer == TIMEOUT {
            match self.active.as_ref().map(|a| &a.pending) {
                Some(Pending::Transact { .. }) => self.cancel(Outcome::Failed, OpsError::Timeout, io),
                Some(_) => self.finish(Outcome::Failed, Some(OpsError::Timeout), io),
                None => {}
            }
        } else if timer == COMMIT {
            if let Some(lock) = self.lock.take() {
                if let Some(v) = lock.staged {
                    self.value = v;
                }
                io.note(RecordKind::Commit, Some(lock.op), Detail::None);
            }
        }
    }

    fn is_idle(&self) -> bool {
        self.active.is_none()
    }
}

/// Network and timing for an operations run.
#[derive(Clone, Debug)]
pub struct OpsSetup {
    pub topology: Topology,
    pub radio: RadioModel,
    pub timers: OpsTimers,
    pub seed: u64,
    pub stream: u64,
    /// Initial variable per node; absent nodes start at their id.
    pub values: BTreeMap<NodeId, Value>,
}

impl OpsSetup {
    pub fn new(topology: Topology) -> Self {
        OpsSetup {
            topology,
            radio: RadioModel::lossless(),
            timers: OpsTimers::default(),
            seed: 0,
            stream: 0,
            values: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpsRun {
    pub trace: Trace,
    /// Initiator results, ordered by operation.
    pub results: Vec<OpResult>,
    /// Final variable per node.
    pub values: BTreeMap<NodeId, Value>,
    pub costs: BTreeMap<OpKey, OpCost>,
}

/// Starts every request at time zero and runs to quiescence.
pub fn run_ops(setup: &OpsSetup, requests: Vec<(NodeId, OpsRequest)>) -> Result<OpsRun, SimError> {
    let nodes = setup
        .topology
        .nodes()
        .map(|id| {
            let v = setup.values.get(&id).copied().unwrap_or(id.0 as Value);
            (id, OpsNode::new(id, v, setup.timers))
        })
        .collect();
    let mut engine = Engine::new(
        setup.topology.clone(),
        setup.radio.clone(),
        substream(setup.seed, setup.stream),
        nodes,
    )?;
    engine.trigger_series(requests, 0)?;
    engine.run()?;
    let (trace, nodes) = engine.into_parts();
    let mut results: Vec<OpResult> = nodes.values().flat_map(|n| n.results.iter().cloned()).collect();
    results.sort_by_key(|r| r.op);
    let values = nodes.iter().map(|(id, n)| (*id, n.value)).collect();
    let costs = cost_by_op(&trace);
    Ok(OpsRun {
        trace,
        results,
        values,
        costs,
    })
}

fn single(setup: &OpsSetup, initiator: NodeId, request: OpsRequest) -> Result<(OpResult, OpsRun), OpsError> {
    if let OpsRequest::Transact {
        read_set,
        write_set,
        ..
    } = &request
    {
        let hood = setup.topology.neighbors(initiator);
        if let Some(n) = read_set.union(write_set).find(|n| !hood.contains(n)) {
            return Err(OpsError::NotNeighbor(*n));
        }
    }
    let run = run_ops(setup, vec![(initiator, request)])?;
    let result = run.results.first().cloned().ok_or(OpsError::NoResult)?;
    match &result.error {
        Some(e) => Err(e.clone()),
        None => Ok((result, run)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadAllOutcome {
    pub values: BTreeMap<NodeId, Value>,
    pub cost: OpCost,
}

/// Reads every neighbor's variable.
pub fn read_all(setup: &OpsSetup, initiator: NodeId) -> Result<ReadAllOutcome, OpsError> {
    let (result, run) = single(setup, initiator, OpsRequest::ReadAll)?;
    Ok(ReadAllOutcome {
        cost: run.costs[&result.op],
        values: result.values,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WriteAllOutcome {
    /// Neighbors whose variable now holds the written value.
    pub delivered: BTreeSet<NodeId>,
    pub cost: OpCost,
}

/// Writes `value` to every neighbor with one broadcast, optionally acked.
pub fn write_all(setup: &OpsSetup, initiator: NodeId, value: Value, acked: bool) -> Result<WriteAllOutcome, OpsError> {
    let (result, run) = single(setup, initiator, OpsRequest::WriteAll { value, acked })?;
    let delivered = run
        .trace
        .of_kind(RecordKind::Commit)
        .filter(|r| r.op == Some(result.op))
        .map(|r| r.node)
        .collect();
    Ok(WriteAllOutcome {
        delivered,
        cost: run.costs[&result.op],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransactOutcome {
    pub values: BTreeMap<NodeId, Value>,
    pub cost: OpCost,
}

/// Reads `read_set` and writes `value` to `write_set` in one transaction.
pub fn transact(
    setup: &OpsSetup,
    initiator: NodeId,
    read_set: BTreeSet<NodeId>,
    write_set: BTreeSet<NodeId>,
    value: Value,
) -> Result<TransactOutcome, OpsError> {
    let request = OpsRequest::Transact {
        read_set,
        write_set,
        value,
    };
    let (result, run) = single(setup, initiator, request)?;
    Ok(TransactOutcome {
        cost: run.costs[&result.op],
        values: result.values,
    })
}
