use std::collections::{BTreeMap, BTreeSet};

use super::action::{Action, IgnoreReason};
use crate::error::ProtocolError;
use crate::message::{Body, Destination, InitBody, Message};
use crate::spec::{SpecId, SpecRegistry};
use crate::types::{NodeId, OpId, OpKey, Outcome, TimerConfig, TimerKind, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitiatorMode {
    Idle,
    /// Collecting accepts; init is rebroadcast to stragglers on each response tick.
    Active,
    /// Collecting abort acknowledgments.
    Abort,
    /// Returned Success; no new invocation until the commit timer runs out.
    AwaitCommitExpiry,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvokeRequest {
    pub spec: SpecId,
    pub args: Vec<Value>,
    /// Apply the operation to the initiator's own variables at commit expiry.
    pub self_write: bool,
}

impl InvokeRequest {
    pub fn new(spec: SpecId, args: Vec<Value>) -> Self {
        InvokeRequest {
            spec,
            args,
            self_write: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitiatorEvent {
    Message(Message),
    Timer(TimerKind),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Initiator {
    id: NodeId,
    mode: InitiatorMode,
    op: OpId,
    responders: BTreeSet<NodeId>,
    collected: BTreeMap<NodeId, Value>,
    invitees: BTreeSet<NodeId>,
    request: Option<InvokeRequest>,
    timers: TimerConfig,
    commit_deadline: Option<u64>,
    armed: BTreeMap<TimerKind, u64>,
}

impl Initiator {
    pub fn new(id: NodeId) -> Self {
        Initiator {
            id,
            mode: InitiatorMode::Idle,
            op: OpId(0),
            responders: BTreeSet::new(),
            collected: BTreeMap::new(),
            invitees: BTreeSet::new(),
            request: None,
            timers: TimerConfig::default(),
            commit_deadline: None,
            armed: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn mode(&self) -> InitiatorMode {
        self.mode
    }

    pub fn is_idle(&self) -> bool {
        self.mode == InitiatorMode::Idle
    }

    /// The current (or most recent) operation.
    pub fn op(&self) -> OpKey {
        OpKey::new(self.id, self.op)
    }

    pub fn responders(&self) -> &BTreeSet<NodeId> {
        &self.responders
    }

    pub fn invitees(&self) -> &BTreeSet<NodeId> {
        &self.invitees
    }

    pub fn collected(&self) -> &BTreeMap<NodeId, Value> {
        &self.collected
    }

    pub fn request(&self) -> Option<&InvokeRequest> {
        self.request.as_ref()
    }

    /// Deadlines of the currently armed timers.
    pub fn armed(&self) -> &BTreeMap<TimerKind, u64> {
        &self.armed
    }

    pub fn invoke(
        &mut self,
        now: u64,
        request: InvokeRequest,
        neighborhood: &BTreeSet<NodeId>,
        timers: TimerConfig,
        specs: &SpecRegistry,
    ) -> Result<Vec<Action>, ProtocolError> {
        if self.mode != InitiatorMode::Idle {
            return Err(ProtocolError::AlreadyActive(self.id));
        }
        if neighborhood.is_empty() {
            return Err(ProtocolError::EmptyNeighborhood(self.id));
        }
        specs.get(request.spec)?;

        self.op = OpId(self.op.0 + 1);
        self.mode = InitiatorMode::Active;
        self.responders.clear();
        self.collected.clear();
        self.invitees = neighborhood.clone();
        self.request = Some(request);
        self.timers = timers;
        self.armed.clear();
        self.commit_deadline = timers.commit_us.map(|c| now + c);

        let mut actions = Vec::with_capacity(4);
        self.arm(&mut actions, now, TimerKind::Timeout, timers.timeout_us);
        self.arm(&mut actions, now, TimerKind::Commit, timers.commit_us);
        let invitees = self.invitees.clone();
        actions.push(self.init_msg(now, invitees));
        self.arm(&mut actions, now, TimerKind::Response, Some(timers.response_us));
        Ok(actions)
    }

    pub fn on_message(&mut self, now: u64, msg: &Message, specs: &SpecRegistry) -> Vec<Action> {
        if msg.initiator != self.id || msg.op != self.op {
            return vec![Action::Ignored(IgnoreReason::StaleOp)];
        }
        let sender = msg.sender;
        match (self.mode, &msg.body) {
            (InitiatorMode::Active, Body::Accept { r }) => {
                if !self.invitees.contains(&sender) {
                    return vec![Action::Ignored(IgnoreReason::NotInvited)];
                }
                self.responders.insert(sender);
                self.collected.insert(sender, *r);
                if self.responders.len() < self.invitees.len() {
                    return Vec::new();
                }
                let responses: Vec<Value> = self.collected.values().copied().collect();
                if self.spec_accepts(&responses, specs) {
                    let mut actions = Vec::with_capacity(3);
                    self.disarm(&mut actions, TimerKind::Response);
                    self.disarm(&mut actions, TimerKind::Timeout);
                    actions.push(Action::Return {
                        op: self.op(),
                        outcome: Outcome::Success,
                    });
                    self.mode = if self.armed.contains_key(&TimerKind::Commit) {
                        InitiatorMode::AwaitCommitExpiry
                    } else {
                        InitiatorMode::Idle
                    };
                    actions
                } else {
                    self.enter_abort(now)
                }
            }
            (InitiatorMode::Active, Body::Reject) => {
                if !self.invitees.contains(&sender) {
                    return vec![Action::Ignored(IgnoreReason::NotInvited)];
                }
                self.enter_abort(now)
            }
            (InitiatorMode::Abort, Body::AbortAck) => {
                if !self.invitees.contains(&sender) {
                    return vec![Action::Ignored(IgnoreReason::NotInvited)];
                }
                self.responders.insert(sender);
                if self.responders.len() < self.invitees.len() {
                    return Vec::new();
                }
                self.finish(Outcome::Canceled)
            }
            _ => vec![Action::Ignored(IgnoreReason::UnexpectedMode)],
        }
    }

    pub fn on_timer(&mut self, now: u64, kind: TimerKind) -> Vec<Action> {
        if self.armed.remove(&kind).is_none() {
            return vec![Action::Ignored(IgnoreReason::StrayTimer)];
        }
        match (self.mode, kind) {
            (InitiatorMode::Active, TimerKind::Response) => {
                let stragglers: BTreeSet<NodeId> =
                    self.invitees.difference(&self.responders).copied().collect();
                let mut actions = vec![self.init_msg(now, stragglers)];
                self.arm(&mut actions, now, TimerKind::Response, Some(self.timers.response_us));
                actions
            }
            (InitiatorMode::Abort, TimerKind::Response) => {
                let mut actions = vec![self.abort_msg()];
                self.arm(&mut actions, now, TimerKind::Response, Some(self.timers.response_us));
                actions
            }
            (InitiatorMode::Active, TimerKind::Timeout) => self.enter_abort(now),
            (InitiatorMode::Abort, TimerKind::Timeout) => self.finish(Outcome::Failed),
            (InitiatorMode::AwaitCommitExpiry, TimerKind::Commit) => {
                self.mode = InitiatorMode::Idle;
                match &self.request {
                    Some(req) if req.self_write => vec![Action::CommitSelf { op: self.op() }],
                    _ => Vec::new(),
                }
            }
            // The commit deadline passed while the operation was still running:
            // neighbors may commit at any moment, so the outcome is unknown.
            (InitiatorMode::Active | InitiatorMode::Abort, TimerKind::Commit) => {
                self.finish(Outcome::Failed)
            }
            _ => vec![Action::Ignored(IgnoreReason::StrayTimer)],
        }
    }

    /// Pure form of the transition function.
    pub fn transition(
        &self,
        now: u64,
        event: &InitiatorEvent,
        specs: &SpecRegistry,
    ) -> (Initiator, Vec<Action>) {
        let mut next = self.clone();
        let actions = match event {
            InitiatorEvent::Message(msg) => next.on_message(now, msg, specs),
            InitiatorEvent::Timer(kind) => next.on_timer(now, *kind),
        };
        (next, actions)
    }

    fn spec_accepts(&self, responses: &[Value], specs: &SpecRegistry) -> bool {
        self.request
            .as_ref()
            .and_then(|req| specs.get(req.spec).ok())
            .map(|spec| spec.aggregate(responses))
            .unwrap_or(false)
    }

    fn enter_abort(&mut self, now: u64) -> Vec<Action> {
        self.mode = InitiatorMode::Abort;
        self.responders.clear();
        let mut actions = vec![self.abort_msg()];
        self.arm(&mut actions, now, TimerKind::Response, Some(self.timers.response_us));
        self.arm(&mut actions, now, TimerKind::Timeout, self.timers.timeout_us);
        actions
    }

    fn finish(&mut self, outcome: Outcome) -> Vec<Action> {
        let mut actions = Vec::with_capacity(4);
        for kind in [TimerKind::Response, TimerKind::Timeout, TimerKind::Commit] {
            self.disarm(&mut actions, kind);
        }
        actions.push(Action::Return {
            op: self.op(),
            outcome,
        });
        self.mode = InitiatorMode::Idle;
        actions
    }

    fn init_msg(&self, now: u64, invitees: BTreeSet<NodeId>) -> Action {
        let req = self.request.as_ref().expect("init sent without a request");
        let msg = Message {
            initiator: self.id,
            sender: self.id,
            op: self.op,
            body: Body::Init(InitBody {
                commit_remaining_us: self.commit_deadline.map(|d| d.saturating_sub(now)),
                invitees,
                spec: req.spec,
                args: req.args.clone(),
            }),
        };
        Action::Send {
            msg,
            dest: Destination::Broadcast,
        }
    }

    fn abort_msg(&self) -> Action {
        Action::Send {
            msg: Message {
                initiator: self.id,
                sender: self.id,
                op: self.op,
                body: Body::Abort,
            },
            dest: Destination::Broadcast,
        }
    }

    fn arm(&mut self, actions: &mut Vec<Action>, now: u64, kind: TimerKind, after: Option<u64>) {
        if let Some(after_us) = after {
            self.armed.insert(kind, now + after_us);
            actions.push(Action::StartTimer { kind, after_us });
        }
    }

    fn disarm(&mut self, actions: &mut Vec<Action>, kind: TimerKind) {
        if self.armed.remove(&kind).is_some() {
            actions.push(Action::StopTimer(kind));
        }
    }
}
