use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use lrw_core::protocol::InvokeRequest;
use lrw_core::{Evaluation, LrwSpec, MessageKind, NodeId, Outcome, SpecRegistry, VarStore};
use neighbor_ops::*;
use simnet::{run_lrw, LinkAttempt, LrwScenario, RadioModel, Topology};

fn ids(range: std::ops::RangeInclusive<u32>) -> BTreeSet<NodeId> {
    range.map(NodeId).collect()
}

#[test]
fn read_all_costs_n_messages_one_round() {
    let out = read_all(&OpsSetup::new(Topology::star(6)), NodeId(0)).unwrap();
    assert_eq!(out.cost, OpCost::new(7, 1));
    assert_eq!(out.values, (1..=6).map(|i| (NodeId(i), i as i64)).collect::<BTreeMap<_, _>>());
    let out = read_all(&OpsSetup::new(Topology::star(1)), NodeId(0)).unwrap();
    assert_eq!(out.cost, OpCost::new(2, 1));
}

#[test]
fn read_all_times_out_when_replies_are_lost() {
    let mut setup = OpsSetup::new(Topology::star(3));
    for q in 1..=3 {
        setup.radio.link_loss.insert((NodeId(q), NodeId(0)), 1.0);
    }
    assert_eq!(read_all(&setup, NodeId(0)), Err(OpsError::Timeout));
}

#[test]
fn write_all_costs() {
    for k in 1..=11 {
        let setup = OpsSetup::new(Topology::star(k));
        assert_eq!(write_all(&setup, NodeId(0), 5, false).unwrap().cost, OpCost::new(1, 1));
    }
    let acked = write_all(&OpsSetup::new(Topology::star(6)), NodeId(0), 5, true).unwrap();
    assert_eq!(acked.cost, OpCost::new(7, 1));
    assert_eq!(acked.delivered, ids(1..=6));
}

#[test]
fn lossy_write_all_delivers_a_subset() {
    let mut setup = OpsSetup::new(Topology::star(6));
    setup.radio = RadioModel::with_loss(0.5);
    setup.seed = 4;
    let a = write_all(&setup, NodeId(0), 9, false).unwrap();
    let b = write_all(&setup, NodeId(0), 9, false).unwrap();
    assert_eq!(a, b);
    assert!(a.delivered.is_subset(&ids(1..=6)));
    let run = run_ops(&setup, vec![(NodeId(0), OpsRequest::WriteAll { value: 9, acked: false })]).unwrap();
    for q in 1..=6 {
        let expected = if a.delivered.contains(&NodeId(q)) { 9 } else { q as i64 };
        assert_eq!(run.values[&NodeId(q)], expected);
    }
}

#[test]
fn transact_costs_two_plus_r_plus_w() {
    let setup = OpsSetup::new(Topology::star(6));
    let out = transact(&setup, NodeId(0), ids(1..=3), ids(4..=5), 42).unwrap();
    assert_eq!(out.cost, OpCost::new(7, 2));
    assert_eq!(out.values.len(), 3);
    let out = transact(&setup, NodeId(0), ids(1..=6), ids(1..=6), 42).unwrap();
    assert_eq!(out.cost, OpCost::new(14, 2));
}

#[test]
fn transact_writes_commit_on_timer() {
    let setup = OpsSetup::new(Topology::star(4));
    let request = OpsRequest::Transact {
        read_set: ids(1..=2),
        write_set: ids(2..=3),
        value: 77,
    };
    let run = run_ops(&setup, vec![(NodeId(0), request)]).unwrap();
    assert_eq!(run.results[0].outcome, Outcome::Success);
    let values: Vec<i64> = (1..=4).map(|q| run.values[&NodeId(q)]).collect();
    assert_eq!(values, vec![1, 77, 77, 4]);
}

#[test]
fn transact_rejects_non_neighbors() {
    let setup = OpsSetup::new(Topology::band(5, 1));
    assert_eq!(
        transact(&setup, NodeId(1), ids(2..=3), BTreeSet::new(), 0),
        Err(OpsError::NotNeighbor(NodeId(3)))
    );
}

#[test]
fn overlapping_transactions_abort_one() {
    let setup = OpsSetup::new(Topology::band(3, 1));
    for seed in 0..50 {
        let setup = OpsSetup { seed, ..setup.clone() };
        let tx = |v| OpsRequest::Transact {
            read_set: [NodeId(2)].into(),
            write_set: [NodeId(2)].into(),
            value: v,
        };
        let run = run_ops(&setup, vec![(NodeId(1), tx(10)), (NodeId(3), tx(30))]).unwrap();
        let outcomes: Vec<Outcome> = run.results.iter().map(|r| r.outcome).collect();
        let winners = outcomes.iter().filter(|o| **o == Outcome::Success).count();
        let losers: Vec<_> = run.results.iter().filter(|r| r.error == Some(OpsError::Conflict)).collect();
        assert_eq!((winners, losers.len()), (1, 1), "seed {seed}: {outcomes:?}");
        let winner = run.results.iter().find(|r| r.outcome == Outcome::Success).unwrap();
        let expected = if winner.op.initiator == NodeId(1) { 10 } else { 30 };
        assert_eq!(run.values[&NodeId(2)], expected);
        assert!(engagements_disjoint(&run.trace));
    }
}

/// Engagements at each node never overlap.
fn engagements_disjoint(trace: &simnet::Trace) -> bool {
    use simnet::RecordKind;
    let mut held: BTreeMap<NodeId, lrw_core::OpKey> = BTreeMap::new();
    for r in trace {
        match r.kind {
            RecordKind::Engage => {
                if held.insert(r.node, r.op.unwrap()).is_some() {
                    return false;
                }
            }
            RecordKind::Commit | RecordKind::Discard if held.get(&r.node) == r.op.as_ref() => {
                held.remove(&r.node);
            }
            _ => {}
        }
    }
    true
}

fn lrw_setup(k: u32) -> LrwScenario {
    let mut reg = SpecRegistry::new();
    let id = reg.register(LrwSpec::new(
        "veto",
        &["veto"],
        &["x"],
        8,
        |s, a| {
            if s.value("veto") != 0 {
                Evaluation::Negative
            } else {
                Evaluation::Respond { r: 0, writes: vec![a[0]] }
            }
        },
        |_| true,
    ));
    let mut sc = LrwScenario::new(Topology::star(k), Arc::new(reg));
    sc.invocations = vec![(NodeId(0), InvokeRequest::new(id, vec![1]))];
    sc
}

#[test]
fn lrw_lossless_cost_is_n_one_round() {
    for k in 1..=11 {
        let run = run_lrw(&lrw_setup(k), None).unwrap();
        let costs = lrw_cost_audit(&run.trace);
        assert_eq!(costs.values().copied().collect::<Vec<_>>(), vec![OpCost::new(k + 1, 1)]);
    }
}

#[test]
fn lrw_rebroadcast_adds_one_broadcast_and_late_accepts() {
    // The first accept from node 3 is lost; the rebroadcast invites only 3.
    let mut dropped = false;
    let filter = Box::new(move |a: &LinkAttempt<'_, lrw_core::Message>| {
        let hit = !dropped && a.from == NodeId(3) && a.msg.kind() == MessageKind::AcceptMsg;
        dropped |= hit;
        hit
    });
    let run = run_lrw(&lrw_setup(6), Some(filter)).unwrap();
    let cost = *lrw_cost_audit(&run.trace).values().next().unwrap();
    let j = 1;
    assert_eq!(cost, OpCost::new(7 + 1 + j, 2));
}

#[test]
fn canceled_lrw_counts_abort_and_acks() {
    let mut sc = lrw_setup(6);
    sc.stores.insert(NodeId(3), VarStore::with_values([("veto", 1)]));
    let run = run_lrw(&sc, None).unwrap();
    let returns: Vec<_> = run.trace.of_kind(simnet::RecordKind::Return).filter_map(|r| r.outcome()).collect();
    assert_eq!(returns, vec![Outcome::Canceled]);
    let cost = *lrw_cost_audit(&run.trace).values().next().unwrap();
    // init + 5 accepts + 1 reject + abort + 6 abort acks
    assert_eq!(cost, OpCost::new(1 + 6 + 1 + 6, 2));
}
