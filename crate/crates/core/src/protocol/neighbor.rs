use super::action::{Action, IgnoreReason};
use crate::message::{Body, Destination, InitBody, Message};
use crate::spec::{Evaluation, SpecRegistry};
use crate::store::VarStore;
use crate::types::{NodeId, OpKey, TimerKind, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborMode {
    Idle,
    /// Holding a tentative write for `op`; `r` is re-sent on duplicate inits.
    Engaged { op: OpKey, r: Value },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NeighborEvent {
    Message(Message),
    CommitTimer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbor {
    id: NodeId,
    mode: NeighborMode,
    store: VarStore,
    commit_deadline: Option<u64>,
}

impl Neighbor {
    pub fn new(id: NodeId, store: VarStore) -> Self {
        Neighbor {
            id,
            mode: NeighborMode::Idle,
            store,
            commit_deadline: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn mode(&self) -> NeighborMode {
        self.mode
    }

    pub fn store(&self) -> &VarStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut VarStore {
        &mut self.store
    }

    pub fn commit_deadline(&self) -> Option<u64> {
        self.commit_deadline
    }

    pub fn on_message(&mut self, now: u64, msg: &Message, specs: &SpecRegistry) -> Vec<Action> {
        match &msg.body {
            Body::Init(init) => self.on_init(now, msg, init, specs),
            Body::Abort => self.on_abort(msg),
            _ => vec![Action::Ignored(IgnoreReason::UnexpectedMode)],
        }
    }

    pub fn on_commit_timer(&mut self, _now: u64) -> Vec<Action> {
        match self.mode {
            NeighborMode::Engaged { op, .. } => self.commit(op),
            NeighborMode::Idle => vec![Action::Ignored(IgnoreReason::StrayTimer)],
        }
    }

    pub fn transition(
        &self,
        now: u64,
        event: &NeighborEvent,
        specs: &SpecRegistry,
    ) -> (Neighbor, Vec<Action>) {
        let mut next = self.clone();
        let actions = match event {
            NeighborEvent::Message(msg) => next.on_message(now, msg, specs),
            NeighborEvent::CommitTimer => next.on_commit_timer(now),
        };
        (next, actions)
    }

    fn on_init(
        &mut self,
        now: u64,
        msg: &Message,
        init: &InitBody,
        specs: &SpecRegistry,
    ) -> Vec<Action> {
        let key = msg.key();
        let invited = init.invitees.contains(&self.id);
        let mut actions = Vec::new();
        match self.mode {
            NeighborMode::Engaged { op, r } if op.initiator == key.initiator => {
                if key.op == op.op {
                    // Duplicate: only stragglers named in the list answer again.
                    return if invited {
                        vec![self.reply(msg, Body::Accept { r })]
                    } else {
                        vec![Action::Ignored(IgnoreReason::NotInvited)]
                    };
                }
                if key.op < op.op {
                    return vec![Action::Ignored(IgnoreReason::StaleOp)];
                }
                // A newer operation from the same initiator means the older
                // one can no longer be aborted.
                actions.extend(self.supersede(op));
            }
            NeighborMode::Engaged { .. } => {
                return if invited {
                    vec![self.reply(msg, Body::Reject)]
                } else {
                    vec![Action::Ignored(IgnoreReason::NotInvited)]
                };
            }
            NeighborMode::Idle => {}
        }

        if !invited {
            actions.push(Action::Ignored(IgnoreReason::NotInvited));
            return actions;
        }
        let evaluation = specs
            .get(init.spec)
            .and_then(|spec| {
                let eval = spec.evaluate(&self.store, &init.args)?;
                Ok(match eval {
                    Evaluation::Respond { r, writes } => Some((r, spec.tentative_write(writes)?)),
                    Evaluation::Negative => None,
                })
            })
            .ok()
            .flatten();
        match evaluation {
            Some((r, write)) => {
                self.store
                    .stage(write)
                    .expect("idle neighbor holds no tentative write");
                self.mode = NeighborMode::Engaged { op: key, r };
                self.commit_deadline = init.commit_remaining_us.map(|t| now + t);
                actions.push(Action::Engage { op: key });
                if let Some(after_us) = init.commit_remaining_us {
                    actions.push(Action::StartTimer {
                        kind: TimerKind::Commit,
                        after_us,
                    });
                }
                actions.push(self.reply(msg, Body::Accept { r }));
            }
            None => actions.push(self.reply(msg, Body::Reject)),
        }
        actions
    }

    fn on_abort(&mut self, msg: &Message) -> Vec<Action> {
        let key = msg.key();
        let mut actions = Vec::new();
        if let NeighborMode::Engaged { op, .. } = self.mode {
            if op.initiator == key.initiator {
                if op.op == key.op {
                    actions.push(Action::StopTimer(TimerKind::Commit));
                    self.store.discard();
                    self.mode = NeighborMode::Idle;
                    self.commit_deadline = None;
                    actions.push(Action::DiscardTentative { op });
                } else if key.op > op.op {
                    actions.extend(self.supersede(op));
                }
            }
        }
        // Acknowledging is idempotent: idle, third-party and stale aborts are
        // all acked so the aborting initiator can reach Canceled.
        actions.push(self.reply(msg, Body::AbortAck));
        actions
    }

    fn supersede(&mut self, op: OpKey) -> Vec<Action> {
        let mut actions = vec![Action::StopTimer(TimerKind::Commit)];
        actions.extend(self.commit(op));
        actions
    }

    fn commit(&mut self, op: OpKey) -> Vec<Action> {
        let writes = self
            .store
            .apply_commit()
            .expect("engaged neighbor holds a tentative write");
        self.mode = NeighborMode::Idle;
        self.commit_deadline = None;
        vec![Action::CommitWrites { op, writes }]
    }

    fn reply(&self, msg: &Message, body: Body) -> Action {
        Action::Send {
            msg: Message {
                initiator: msg.initiator,
                sender: self.id,
                op: msg.op,
                body,
            },
            dest: Destination::Unicast(msg.initiator),
        }
    }
}
