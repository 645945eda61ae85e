use std::collections::BTreeSet;

use lrw_core::protocol::{
    Action, IgnoreReason, Initiator, InitiatorEvent, InitiatorMode, InvokeRequest, LrwNode,
    Neighbor, NeighborEvent, NeighborMode,
};
use lrw_core::{
    Body, Destination, Evaluation, InitBody, LrwSpec, Message, MessageKind, NodeId, OpId, OpKey,
    Outcome, ProtocolError, Role, SpecId, SpecRegistry, TimerConfig, TimerId, TimerKind, VarStore,
    MS,
};
use proptest::prelude::*;

const P: NodeId = NodeId(0);

fn registry() -> (SpecRegistry, SpecId, SpecId, SpecId) {
    let mut reg = SpecRegistry::new();
    // Writes the first argument to `v`; responds with the old `v`.
    let write = reg.register(LrwSpec::new(
        "write-v",
        &["v"],
        &["v"],
        8,
        |store, args| Evaluation::Respond {
            r: store.value("v"),
            writes: vec![args[0]],
        },
        |_| true,
    ));
    // Aggregate fails whenever any neighbor reports v >= 5.
    let bounded = reg.register(LrwSpec::new(
        "bounded",
        &["v"],
        &["v"],
        8,
        |store, args| Evaluation::Respond {
            r: store.value("v"),
            writes: vec![args[0]],
        },
        |rs| rs.iter().all(|r| *r < 5),
    ));
    let refuse = reg.register(LrwSpec::new("refuse", &[], &["v"], 4, |_, _| Evaluation::Negative, |_| true));
    (reg, write, bounded, refuse)
}

fn hood(n: u32) -> BTreeSet<NodeId> {
    (1..=n).map(NodeId).collect()
}

fn timers() -> TimerConfig {
    TimerConfig::from_ms(40, 100, 200)
}

fn sends(actions: &[Action]) -> Vec<(&Message, Destination)> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Send { msg, dest } => Some((msg, *dest)),
            _ => None,
        })
        .collect()
}

fn returns(actions: &[Action]) -> Vec<Outcome> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Return { outcome, .. } => Some(*outcome),
            _ => None,
        })
        .collect()
}

fn reply(from: u32, op: u64, body: Body) -> Message {
    Message {
        initiator: P,
        sender: NodeId(from),
        op: OpId(op),
        body,
    }
}

fn init_from(initiator: NodeId, op: u64, invitees: &[u32], commit_ms: u64, spec: SpecId, arg: i64) -> Message {
    Message {
        initiator,
        sender: initiator,
        op: OpId(op),
        body: Body::Init(InitBody {
            commit_remaining_us: Some(commit_ms * MS),
            invitees: invitees.iter().copied().map(NodeId).collect(),
            spec,
            args: vec![arg],
        }),
    }
}

fn abort_from(initiator: NodeId, op: u64) -> Message {
    Message {
        initiator,
        sender: initiator,
        op: OpId(op),
        body: Body::Abort,
    }
}

fn active(n: u32, spec: SpecId, reg: &SpecRegistry) -> Initiator {
    let mut init = Initiator::new(P);
    init.invoke(0, InvokeRequest::new(spec, vec![9]), &hood(n), timers(), reg)
        .unwrap();
    init
}

#[test]
fn invoke_broadcasts_full_invitee_list() {
    let (reg, write, _, _) = registry();
    let mut init = Initiator::new(P);
    let actions = init
        .invoke(0, InvokeRequest::new(write, vec![9]), &hood(6), timers(), &reg)
        .unwrap();
    assert_eq!(init.mode(), InitiatorMode::Active);
    assert_eq!(
        actions[0],
        Action::StartTimer {
            kind: TimerKind::Timeout,
            after_us: 100 * MS
        }
    );
    assert_eq!(
        actions[1],
        Action::StartTimer {
            kind: TimerKind::Commit,
            after_us: 200 * MS
        }
    );
    let (msg, dest) = sends(&actions)[0];
    assert_eq!(dest, Destination::Broadcast);
    match &msg.body {
        Body::Init(body) => {
            assert_eq!(body.invitees.len(), 6);
            assert_eq!(body.commit_remaining_us, Some(200 * MS));
        }
        other => panic!("expected init, got {other:?}"),
    }
    assert_eq!(
        actions[3],
        Action::StartTimer {
            kind: TimerKind::Response,
            after_us: 40 * MS
        }
    );
}

#[test]
fn invoke_rejects_empty_neighborhood() {
    let (reg, write, _, _) = registry();
    let mut init = Initiator::new(P);
    let err = init
        .invoke(0, InvokeRequest::new(write, vec![]), &BTreeSet::new(), timers(), &reg)
        .unwrap_err();
    assert_eq!(err, ProtocolError::EmptyNeighborhood(P));
    assert_eq!(init.mode(), InitiatorMode::Idle);
}

#[test]
fn second_invoke_while_active_is_refused() {
    let (reg, write, _, _) = registry();
    let mut init = active(6, write, &reg);
    let err = init
        .invoke(1, InvokeRequest::new(write, vec![1]), &hood(6), timers(), &reg)
        .unwrap_err();
    assert_eq!(err, ProtocolError::AlreadyActive(P));
}

#[test]
fn full_cover_returns_success() {
    let (reg, write, _, _) = registry();
    let mut init = active(6, write, &reg);
    for q in 1..6 {
        assert!(init.on_message(10, &reply(q, 1, Body::Accept { r: 0 }), &reg).is_empty());
    }
    let actions = init.on_message(12, &reply(6, 1, Body::Accept { r: 0 }), &reg);
    assert_eq!(
        actions,
        vec![
            Action::StopTimer(TimerKind::Response),
            Action::StopTimer(TimerKind::Timeout),
            Action::Return {
                op: OpKey::new(P, OpId(1)),
                outcome: Outcome::Success
            }
        ]
    );
    assert_eq!(init.mode(), InitiatorMode::AwaitCommitExpiry);
}

#[test]
fn reject_enters_abort() {
    let (reg, write, _, _) = registry();
    let mut init = active(6, write, &reg);
    init.on_message(5, &reply(1, 1, Body::Accept { r: 0 }), &reg);
    let actions = init.on_message(6, &reply(2, 1, Body::Reject), &reg);
    assert_eq!(init.mode(), InitiatorMode::Abort);
    assert!(init.responders().is_empty());
    assert_eq!(sends(&actions)[0].0.kind(), MessageKind::AbortMsg);
    assert_eq!(sends(&actions)[0].1, Destination::Broadcast);
    assert!(actions.contains(&Action::StartTimer {
        kind: TimerKind::Response,
        after_us: 40 * MS
    }));
    assert!(actions.contains(&Action::StartTimer {
        kind: TimerKind::Timeout,
        after_us: 100 * MS
    }));
}

#[test]
fn final_abort_ack_returns_canceled() {
    let (reg, write, _, _) = registry();
    let mut init = active(3, write, &reg);
    init.on_message(5, &reply(1, 1, Body::Reject), &reg);
    init.on_message(8, &reply(1, 1, Body::AbortAck), &reg);
    init.on_message(9, &reply(2, 1, Body::AbortAck), &reg);
    let actions = init.on_message(10, &reply(3, 1, Body::AbortAck), &reg);
    assert_eq!(returns(&actions), vec![Outcome::Canceled]);
    assert!(actions.contains(&Action::StopTimer(TimerKind::Commit)));
    assert_eq!(init.mode(), InitiatorMode::Idle);
}

#[test]
fn aggregate_false_routes_to_abort() {
    let (reg, _, bounded, _) = registry();
    let mut init = active(2, bounded, &reg);
    init.on_message(5, &reply(1, 1, Body::Accept { r: 1 }), &reg);
    let actions = init.on_message(6, &reply(2, 1, Body::Accept { r: 7 }), &reg);
    assert_eq!(init.mode(), InitiatorMode::Abort);
    assert!(returns(&actions).is_empty());
    assert_eq!(sends(&actions)[0].0.kind(), MessageKind::AbortMsg);
}

#[test]
fn response_expiry_reinvites_stragglers() {
    let (reg, write, _, _) = registry();
    let mut init = active(6, write, &reg);
    for q in 1..=3 {
        init.on_message(10 * MS, &reply(q, 1, Body::Accept { r: 0 }), &reg);
    }
    let actions = init.on_timer(40 * MS, TimerKind::Response);
    let (msg, dest) = sends(&actions)[0];
    assert_eq!(dest, Destination::Broadcast);
    match &msg.body {
        Body::Init(body) => {
            assert_eq!(body.invitees, [4, 5, 6].into_iter().map(NodeId).collect());
            assert_eq!(body.commit_remaining_us, Some(160 * MS));
        }
        other => panic!("expected init, got {other:?}"),
    }
    assert!(actions.contains(&Action::StartTimer {
        kind: TimerKind::Response,
        after_us: 40 * MS
    }));
}

#[test]
fn response_expiry_in_abort_rebroadcasts_abort() {
    let (reg, write, _, _) = registry();
    let mut init = active(2, write, &reg);
    init.on_timer(100 * MS, TimerKind::Timeout);
    let actions = init.on_timer(140 * MS, TimerKind::Response);
    assert_eq!(sends(&actions)[0].0.kind(), MessageKind::AbortMsg);
}

#[test]
fn timeout_in_abort_fails() {
    let (reg, write, _, _) = registry();
    let mut init = active(6, write, &reg);
    let to_abort = init.on_timer(100 * MS, TimerKind::Timeout);
    assert_eq!(sends(&to_abort)[0].0.kind(), MessageKind::AbortMsg);
    let actions = init.on_timer(200 * MS, TimerKind::Timeout);
    assert_eq!(returns(&actions), vec![Outcome::Failed]);
    assert_eq!(init.mode(), InitiatorMode::Idle);
}

#[test]
fn commit_expiry_releases_initiator() {
    let (reg, write, _, _) = registry();
    let mut init = active(1, write, &reg);
    init.on_message(5 * MS, &reply(1, 1, Body::Accept { r: 0 }), &reg);
    assert_eq!(init.mode(), InitiatorMode::AwaitCommitExpiry);
    assert!(init
        .invoke(6 * MS, InvokeRequest::new(write, vec![1]), &hood(1), timers(), &reg)
        .is_err());
    init.on_timer(200 * MS, TimerKind::Commit);
    assert_eq!(init.mode(), InitiatorMode::Idle);
    assert!(init
        .invoke(201 * MS, InvokeRequest::new(write, vec![1]), &hood(1), timers(), &reg)
        .is_ok());
    assert_eq!(init.op().op, OpId(2));
}

#[test]
fn stale_and_foreign_replies_are_ignored() {
    let (reg, write, _, _) = registry();
    let mut init = active(2, write, &reg);
    let before = init.clone();
    assert_eq!(
        init.on_message(1, &reply(1, 0, Body::Accept { r: 0 }), &reg),
        vec![Action::Ignored(IgnoreReason::StaleOp)]
    );
    assert_eq!(
        init.on_message(1, &reply(9, 1, Body::Accept { r: 0 }), &reg),
        vec![Action::Ignored(IgnoreReason::NotInvited)]
    );
    assert_eq!(init, before);
}

#[test]
fn neighbor_happy_path() {
    let (reg, write, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::with_values([("v", 5)]));
    let actions = q.on_message(0, &init_from(P, 1, &[1, 2], 100, write, 9), &reg);
    assert_eq!(q.mode(), NeighborMode::Engaged { op: OpKey::new(P, OpId(1)), r: 5 });
    assert!(actions.contains(&Action::StartTimer {
        kind: TimerKind::Commit,
        after_us: 100 * MS
    }));
    let (msg, dest) = sends(&actions)[0];
    assert_eq!(msg.body, Body::Accept { r: 5 });
    assert_eq!(dest, Destination::Unicast(P));
    assert_eq!(q.store().get("v"), Some(5));

    let actions = q.on_commit_timer(100 * MS);
    assert!(matches!(actions[0], Action::CommitWrites { .. }));
    assert_eq!(q.mode(), NeighborMode::Idle);
    assert_eq!(q.store().get("v"), Some(9));
}

#[test]
fn engaged_neighbor_rejects_other_initiator() {
    let (reg, write, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::new());
    q.on_message(0, &init_from(P, 1, &[1], 100, write, 9), &reg);
    let z = NodeId(7);
    let actions = q.on_message(1, &init_from(z, 1, &[1], 100, write, 3), &reg);
    let (msg, dest) = sends(&actions)[0];
    assert_eq!(msg.kind(), MessageKind::RejectMsg);
    assert_eq!(dest, Destination::Unicast(z));
    assert_eq!(q.mode(), NeighborMode::Engaged { op: OpKey::new(P, OpId(1)), r: 0 });
}

#[test]
fn idle_neighbor_acks_any_abort() {
    let (reg, _, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::new());
    let r = NodeId(4);
    let actions = q.on_message(0, &abort_from(r, 3), &reg);
    let (msg, dest) = sends(&actions)[0];
    assert_eq!(msg.kind(), MessageKind::AbortAck);
    assert_eq!(dest, Destination::Unicast(r));
    assert_eq!(q.mode(), NeighborMode::Idle);
}

#[test]
fn abort_takes_precedence_over_commit() {
    let (reg, write, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::with_values([("v", 1)]));
    q.on_message(0, &init_from(P, 1, &[1], 100, write, 9), &reg);
    let actions = q.on_message(99 * MS, &abort_from(P, 1), &reg);
    assert!(actions.contains(&Action::DiscardTentative { op: OpKey::new(P, OpId(1)) }));
    assert!(actions.contains(&Action::StopTimer(TimerKind::Commit)));
    assert_eq!(q.mode(), NeighborMode::Idle);
    assert_eq!(q.store().get("v"), Some(1));
    // The canceled commit timer firing late is dropped.
    assert_eq!(
        q.on_commit_timer(100 * MS),
        vec![Action::Ignored(IgnoreReason::StrayTimer)]
    );
    assert_eq!(q.store().get("v"), Some(1));
}

#[test]
fn engaged_neighbor_acks_third_party_abort_without_disengaging() {
    let (reg, write, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::new());
    q.on_message(0, &init_from(P, 1, &[1], 100, write, 9), &reg);
    let before = q.mode();
    let actions = q.on_message(1, &abort_from(NodeId(8), 2), &reg);
    assert_eq!(sends(&actions)[0].0.kind(), MessageKind::AbortAck);
    assert_eq!(sends(&actions)[0].1, Destination::Unicast(NodeId(8)));
    assert_eq!(q.mode(), before);
}

#[test]
fn duplicate_init_reaccepts_only_when_invited() {
    let (reg, write, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::new());
    q.on_message(0, &init_from(P, 1, &[1, 2], 100, write, 9), &reg);
    let again = q.on_message(40, &init_from(P, 1, &[1], 60, write, 9), &reg);
    assert_eq!(sends(&again)[0].0.kind(), MessageKind::AcceptMsg);
    let skipped = q.on_message(80, &init_from(P, 1, &[2], 20, write, 9), &reg);
    assert_eq!(skipped, vec![Action::Ignored(IgnoreReason::NotInvited)]);
}

#[test]
fn negative_evaluation_rejects_without_engaging() {
    let (reg, _, _, refuse) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::new());
    let actions = q.on_message(0, &init_from(P, 1, &[1], 100, refuse, 0), &reg);
    assert_eq!(sends(&actions)[0].0.kind(), MessageKind::RejectMsg);
    assert_eq!(q.mode(), NeighborMode::Idle);
    assert!(q.store().tentative().is_none());
}

#[test]
fn newer_op_from_same_initiator_commits_the_older_one() {
    let (reg, write, _, _) = registry();
    let mut q = Neighbor::new(NodeId(1), VarStore::new());
    q.on_message(0, &init_from(P, 1, &[1], 100, write, 4), &reg);
    let actions = q.on_message(50, &init_from(P, 2, &[1], 100, write, 6), &reg);
    assert!(matches!(
        actions.iter().find(|a| matches!(a, Action::CommitWrites { .. })),
        Some(Action::CommitWrites { op, .. }) if *op == OpKey::new(P, OpId(1))
    ));
    assert_eq!(q.store().get("v"), Some(4));
    assert_eq!(q.mode(), NeighborMode::Engaged { op: OpKey::new(P, OpId(2)), r: 4 });
}

#[test]
fn node_routes_roles_and_self_commits() {
    let (reg, write, _, _) = registry();
    let mut node = LrwNode::new(P, VarStore::new());
    let req = InvokeRequest {
        spec: write,
        args: vec![3],
        self_write: true,
    };
    let actions = node.invoke(0, req, &hood(1), timers(), &reg).unwrap();
    assert!(actions.iter().all(|a| a.role == Role::Initiator));
    node.on_message(5 * MS, &reply(1, 1, Body::Accept { r: 0 }), &reg);
    let fired = node.on_timer(200 * MS, TimerId::new(Role::Initiator, TimerKind::Commit), &reg);
    assert!(matches!(fired[0].action, Action::CommitSelf { .. }));
    assert_eq!(node.store().get("v"), Some(3));
}

/// Everything the environment can throw at an initiator.
fn initiator_event() -> impl Strategy<Value = InitiatorEvent> {
    prop_oneof![
        (1u32..=4, 0u64..=2, 0u8..3).prop_map(|(q, op, k)| {
            let body = match k {
                0 => Body::Accept { r: q as i64 },
                1 => Body::Reject,
                _ => Body::AbortAck,
            };
            InitiatorEvent::Message(reply(q, op, body))
        }),
        prop_oneof![
            Just(TimerKind::Response),
            Just(TimerKind::Timeout),
            Just(TimerKind::Commit)
        ]
        .prop_map(InitiatorEvent::Timer),
    ]
}

fn neighbor_event() -> impl Strategy<Value = NeighborEvent> {
    prop_oneof![
        (0u32..3, 1u64..=3, any::<bool>(), any::<bool>()).prop_map(|(p, op, invited, is_init)| {
            let initiator = NodeId(10 + p);
            let msg = if is_init {
                let invitees: &[u32] = if invited { &[1] } else { &[2] };
                init_from(initiator, op, invitees, 100, SpecId(0), op as i64)
            } else {
                abort_from(initiator, op)
            };
            NeighborEvent::Message(msg)
        }),
        Just(NeighborEvent::CommitTimer),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn initiator_invariants(events in proptest::collection::vec(initiator_event(), 0..40)) {
        let (reg, write, _, _) = registry();
        let mut state = active(4, write, &reg);
        let mut returned = 0;
        for (i, ev) in events.iter().enumerate() {
            let now = (i as u64 + 1) * MS;
            let (next, actions) = state.transition(now, ev, &reg);
            // Same (state, event) gives the same result.
            let (again, actions_again) = state.transition(now, ev, &reg);
            prop_assert_eq!(&next, &again);
            prop_assert_eq!(&actions, &actions_again);

            returned += returns(&actions).len();
            state = next;
            prop_assert!(state.responders().is_subset(state.invitees()));
            if state.mode() == InitiatorMode::Active {
                for kind in [TimerKind::Response, TimerKind::Timeout, TimerKind::Commit] {
                    prop_assert!(state.armed().contains_key(&kind));
                }
            }
            for (msg, dest) in sends(&actions) {
                prop_assert_eq!(dest, msg.destination());
            }
        }
        prop_assert!(returned <= 1);
    }

    #[test]
    fn neighbor_invariants(events in proptest::collection::vec(neighbor_event(), 0..40)) {
        let (reg, _, _, _) = registry();
        let mut state = Neighbor::new(NodeId(1), VarStore::new());
        for (i, ev) in events.iter().enumerate() {
            let (next, actions) = state.transition(i as u64, ev, &reg);
            prop_assert_eq!(state.transition(i as u64, ev, &reg), (next.clone(), actions.clone()));
            state = next;
            // Tentative write present exactly while engaged.
            prop_assert_eq!(
                state.store().tentative().is_some(),
                matches!(state.mode(), NeighborMode::Engaged { .. })
            );
            for (msg, dest) in sends(&actions) {
                prop_assert_eq!(dest, msg.destination());
                prop_assert!(!msg.kind().is_broadcast());
            }
        }
    }
}
