use std::collections::BTreeSet;

use super::action::{Action, IgnoreReason};
use super::initiator::{Initiator, InvokeRequest};
use super::neighbor::Neighbor;
use crate::error::ProtocolError;
use crate::message::{Body, Message};
use crate::spec::{Evaluation, SpecRegistry};
use crate::store::VarStore;
use crate::types::{NodeId, Role, TimerConfig, TimerId, TimerKind};

/// An action tagged with the role that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeAction {
    pub role: Role,
    pub action: Action,
}

impl NodeAction {
    /// The timer an action refers to, if any, qualified by role.
    pub fn timer(&self) -> Option<TimerId> {
        match self.action {
            Action::StartTimer { kind, .. } | Action::StopTimer(kind) => {
                Some(TimerId::new(self.role, kind))
            }
            _ => None,
        }
    }
}

/// One sensor node: an initiator and a neighbor sharing a variable store.
/// Init and abort messages go to the neighbor role; replies go to the
/// initiator role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LrwNode {
    pub initiator: Initiator,
    pub neighbor: Neighbor,
}

impl LrwNode {
    pub fn new(id: NodeId, store: VarStore) -> Self {
        LrwNode {
            initiator: Initiator::new(id),
            neighbor: Neighbor::new(id, store),
        }
    }

    pub fn id(&self) -> NodeId {
        self.initiator.id()
    }

    pub fn store(&self) -> &VarStore {
        self.neighbor.store()
    }

    pub fn invoke(
        &mut self,
        now: u64,
        request: InvokeRequest,
        neighborhood: &BTreeSet<NodeId>,
        timers: TimerConfig,
        specs: &SpecRegistry,
    ) -> Result<Vec<NodeAction>, ProtocolError> {
        let actions = self
            .initiator
            .invoke(now, request, neighborhood, timers, specs)?;
        Ok(tag(Role::Initiator, actions))
    }

    pub fn on_message(&mut self, now: u64, msg: &Message, specs: &SpecRegistry) -> Vec<NodeAction> {
        match msg.body {
            Body::Init(_) | Body::Abort => {
                tag(Role::Neighbor, self.neighbor.on_message(now, msg, specs))
            }
            Body::Accept { .. } | Body::Reject | Body::AbortAck => {
                if msg.initiator != self.id() {
                    return tag(Role::Initiator, vec![Action::Ignored(IgnoreReason::NotInvited)]);
                }
                tag(Role::Initiator, self.initiator.on_message(now, msg, specs))
            }
        }
    }

    pub fn on_timer(&mut self, now: u64, timer: TimerId, specs: &SpecRegistry) -> Vec<NodeAction> {
        match (timer.role, timer.kind) {
            (Role::Initiator, kind) => {
                let actions = self.initiator.on_timer(now, kind);
                self.apply_self_commit(&actions, specs);
                tag(Role::Initiator, actions)
            }
            (Role::Neighbor, TimerKind::Commit) => {
                tag(Role::Neighbor, self.neighbor.on_commit_timer(now))
            }
            (Role::Neighbor, _) => tag(Role::Neighbor, vec![Action::Ignored(IgnoreReason::StrayTimer)]),
        }
    }

    /// The initiator writes its own variables through `f` evaluated locally.
    fn apply_self_commit(&mut self, actions: &[Action], specs: &SpecRegistry) {
        if !actions.iter().any(|a| matches!(a, Action::CommitSelf { .. })) {
            return;
        }
        let Some(req) = self.initiator.request() else { return };
        let Ok(spec) = specs.get(req.spec) else { return };
        if let Ok(Evaluation::Respond { writes, .. }) = spec.evaluate(self.neighbor.store(), &req.args) {
            if let Ok(write) = spec.tentative_write(writes) {
                self.neighbor.store_mut().write_through(&write);
            }
        }
    }
}

fn tag(role: Role, actions: Vec<Action>) -> Vec<NodeAction> {
    actions
        .into_iter()
        .map(|action| NodeAction { role, action })
        .collect()
}
