//! LRW nodes on the simulated radio.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use lrw_core::protocol::{Action, InvokeRequest, LrwNode, NeighborMode, NodeAction};
use lrw_core::{
    validate_spec, Message, NodeId, OpKey, ProtocolError, Role, SpecRegistry, TimerConfig,
    TimerId, VarStore,
};

use crate::engine::{Behavior, DropFilter, Engine, NodeIo, Primitive, RunStats, SimMessage};
use crate::error::SimError;
use crate::radio::RadioModel;
use crate::rng::substream;
use crate::topology::Topology;
use crate::trace::{Detail, RecordKind, Trace};

impl SimMessage for Message {
    fn label(&self) -> &'static str {
        self.kind().as_str()
    }

    fn op(&self) -> Option<OpKey> {
        Some(self.key())
    }
}

/// Adapts [`LrwNode`] to the engine and records protocol events in the trace.
#[derive(Clone, Debug)]
pub struct LrwSimNode {
    node: LrwNode,
    specs: Arc<SpecRegistry>,
    timers: TimerConfig,
}

impl LrwSimNode {
    pub fn new(id: NodeId, store: VarStore, specs: Arc<SpecRegistry>, timers: TimerConfig) -> Self {
        LrwSimNode {
            node: LrwNode::new(id, store),
            specs,
            timers,
        }
    }

    pub fn node(&self) -> &LrwNode {
        &self.node
    }

    pub fn store(&self) -> &VarStore {
        self.node.store()
    }

    fn op_for(&self, role: Role) -> Option<OpKey> {
        match role {
            Role::Initiator => Some(self.node.initiator.op()),
            Role::Neighbor => match self.node.neighbor.mode() {
                NeighborMode::Engaged { op, .. } => Some(op),
                NeighborMode::Idle => None,
            },
        }
    }

    fn apply(&self, actions: Vec<NodeAction>, context: Option<OpKey>, io: &mut NodeIo<Message>) {
        for NodeAction { role, action } in actions {
            match action {
                Action::Send { msg, dest } => io.send(msg, dest),
                Action::StartTimer { kind, after_us } => {
                    let op = self.op_for(role).or(context);
                    io.start_timer(TimerId::new(role, kind), after_us, op);
                }
                Action::StopTimer(kind) => io.stop_timer(TimerId::new(role, kind)),
                Action::Engage { op } => io.note(RecordKind::Engage, Some(op), Detail::None),
                Action::CommitWrites { op, .. } => io.note(RecordKind::Commit, Some(op), Detail::None),
                Action::DiscardTentative { op } => {
                    io.note(RecordKind::Discard, Some(op), Detail::None)
                }
                Action::CommitSelf { op } => io.note(RecordKind::SelfCommit, Some(op), Detail::None),
                Action::Return { op, outcome } => {
                    io.note(RecordKind::Return, Some(op), Detail::Outcome(outcome))
                }
                Action::Ignored(reason) => {
                    io.note(RecordKind::Ignore, context, Detail::Reason(reason.as_str()))
                }
            }
        }
    }
}

impl Behavior for LrwSimNode {
    type Msg = Message;
    type Request = InvokeRequest;

    fn invoke(&mut self, request: InvokeRequest, io: &mut NodeIo<Message>) -> Result<(), &'static str> {
        let hood = io.neighbors().clone();
        match self.node.invoke(io.now(), request, &hood, self.timers, &self.specs) {
            Ok(actions) => {
                let op = self.node.initiator.op();
                io.note(RecordKind::Invoke, Some(op), Detail::Invitees(hood));
                self.apply(actions, Some(op), io);
                Ok(())
            }
            Err(ProtocolError::AlreadyActive(_)) => Err("already-active"),
            Err(ProtocolError::EmptyNeighborhood(_)) => Err("empty-neighborhood"),
            Err(ProtocolError::Spec(_)) => Err("spec-error"),
        }
    }

    fn on_message(&mut self, _from: NodeId, msg: &Message, io: &mut NodeIo<Message>) {
        let actions = self.node.on_message(io.now(), msg, &self.specs);
        self.apply(actions, Some(msg.key()), io);
    }

    fn on_timer(&mut self, timer: TimerId, io: &mut NodeIo<Message>) {
        let context = self.op_for(timer.role);
        let actions = self.node.on_timer(io.now(), timer, &self.specs);
        self.apply(actions, context, io);
    }

    fn is_idle(&self) -> bool {
        self.node.initiator.is_idle()
    }
}

/// One simulated LRW run: all invocations fire together at time zero.
#[derive(Clone, Debug)]
pub struct LrwScenario {
    pub topology: Topology,
    pub radio: RadioModel,
    pub primitive: Primitive,
    pub timers: TimerConfig,
    pub specs: Arc<SpecRegistry>,
    /// Initial stores; absent nodes start empty.
    pub stores: BTreeMap<NodeId, VarStore>,
    pub invocations: Vec<(NodeId, InvokeRequest)>,
    pub seed: u64,
    pub stream: u64,
    /// Enforce the radio payload limit on every invoked spec.
    pub strict_payload: bool,
    pub max_events: u64,
}

impl LrwScenario {
    pub fn new(topology: Topology, specs: Arc<SpecRegistry>) -> Self {
        LrwScenario {
            topology,
            radio: RadioModel::default(),
            primitive: Primitive::Broadcast,
            timers: TimerConfig::default(),
            specs,
            stores: BTreeMap::new(),
            invocations: Vec::new(),
            seed: 0,
            stream: 0,
            strict_payload: false,
            max_events: crate::engine::DEFAULT_MAX_EVENTS,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.timers.validate()?;
        self.radio.validate()?;
        let mut used = BTreeSet::new();
        for (node, request) in &self.invocations {
            if !self.topology.contains(*node) {
                return Err(SimError::UnknownNode(*node));
            }
            used.insert(request.spec);
        }
        for id in used {
            validate_spec(self.specs.get(id)?, self.strict_payload)?;
        }
        Ok(())
    }

    pub fn engine(&self) -> Result<Engine<LrwSimNode>, SimError> {
        self.validate()?;
        let nodes = self
            .topology
            .nodes()
            .map(|id| {
                let store = self.stores.get(&id).cloned().unwrap_or_default();
                (id, LrwSimNode::new(id, store, Arc::clone(&self.specs), self.timers))
            })
            .collect();
        let engine = Engine::new(
            self.topology.clone(),
            self.radio.clone(),
            substream(self.seed, self.stream),
            nodes,
        )?;
        Ok(engine
            .with_primitive(self.primitive)
            .with_max_events(self.max_events))
    }
}

#[derive(Clone, Debug)]
pub struct LrwRun {
    pub trace: Trace,
    /// Committed store of every node after quiescence.
    pub stores: BTreeMap<NodeId, VarStore>,
    pub stats: RunStats,
}

/// Runs `scenario` to quiescence, optionally forcing drops.
pub fn run_lrw(scenario: &LrwScenario, filter: Option<DropFilter<Message>>) -> Result<LrwRun, SimError> {
    let mut engine = scenario.engine()?;
    if let Some(filter) = filter {
        engine = engine.with_drop_filter(filter);
    }
    engine.trigger_series(scenario.invocations.clone(), 0)?;
    let stats = engine.run()?;
    let (trace, nodes) = engine.into_parts();
    let stores = nodes
        .into_iter()
        .map(|(id, n)| (id, n.store().clone()))
        .collect();
    Ok(LrwRun {
        trace,
        stores,
        stats,
    })
}

/// The trace of one run; a pure function of the scenario.
pub fn run_scenario(scenario: &LrwScenario) -> Result<Trace, SimError> {
    run_lrw(scenario, None).map(|run| run.trace)
}
