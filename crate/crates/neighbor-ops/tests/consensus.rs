use neighbor_ops::consensus::UvwState;
use neighbor_ops::*;
use proptest::prelude::*;

const INPUTS: [(i64, i64); 4] = [(0, 1), (1, 0), (0, 0), (1, 1)];

#[test]
fn uvw_all_schedules_agree() {
    for (p, q) in INPUTS {
        let ex = explore_interleavings(&UvwConsensus::new(p, q), 8).unwrap();
        assert_eq!(ex.schedules, 6);
        assert!(check_consensus(&ex, &[p, q]).is_empty(), "{p},{q}: {:?}", ex.terminals);
        for v in &ex.terminals {
            assert!(v == &vec![Some(p), Some(p)] || v == &vec![Some(q), Some(q)]);
        }
    }
    // Both outcomes are reachable with differing inputs.
    let ex = explore_interleavings(&UvwConsensus::new(0, 1), 8).unwrap();
    assert_eq!(ex.terminals.len(), 2);
}

fn run(protocol: &UvwConsensus, schedule: &[usize]) -> UvwState {
    let mut s = protocol.initial();
    for n in schedule {
        protocol.step(&mut s, *n);
    }
    s
}

#[test]
fn uvw_p_first_while_q_sleeps() {
    let proto = UvwConsensus::new(0, 1);
    let s = run(&proto, &[0, 0]);
    assert_eq!(s.copies[0].2, None);
    assert_eq!(s.nodes[0].decision(), Some(0));
    let s = run(&proto, &[0, 0, 1, 1]);
    assert_eq!(s.nodes[1].decision(), Some(0));
}

#[test]
fn uvw_q_first_then_p_adopts() {
    let proto = UvwConsensus::new(0, 1);
    let s = run(&proto, &[1, 0, 0, 1]);
    // p sees w set and v holding its own input, so q was first.
    assert_eq!(s.nodes[0].decision(), Some(1));
    assert_eq!(s.nodes[1].decision(), Some(1));
}

#[test]
fn lrw_consensus_agrees_for_two_and_three_nodes() {
    for (p, q) in INPUTS {
        let ex = explore_interleavings(&LrwConsensus::new(vec![p, q]), 4).unwrap();
        assert_eq!(ex.schedules, 2);
        assert!(check_consensus(&ex, &[p, q]).is_empty());
        assert!(!ex.terminals.contains(&vec![Some(0), Some(1)]));
        assert!(!ex.terminals.contains(&vec![Some(1), Some(0)]));
    }
    let inputs = vec![4, 5, 6];
    let ex = explore_interleavings(&LrwConsensus::new(inputs.clone()), 6).unwrap();
    assert_eq!(ex.schedules, 6);
    assert!(check_consensus(&ex, &inputs).is_empty());
    assert_eq!(ex.terminals.len(), 3);
}

#[test]
fn first_lrw_fixes_the_decision() {
    let proto = LrwConsensus::new(vec![0, 1]);
    let mut s = proto.initial();
    proto.step(&mut s, 0);
    proto.step(&mut s, 1);
    assert_eq!(s.nodes.iter().map(|n| n.decision()).collect::<Vec<_>>(), vec![Some(0), Some(0)]);
}

#[test]
fn single_node_has_one_schedule() {
    let ex = explore_interleavings(&LrwConsensus::new(vec![7]), 2).unwrap();
    assert_eq!(ex.schedules, 1);
    assert_eq!(ex.terminals.iter().next().unwrap(), &vec![Some(7)]);
}

#[test]
fn step_budget_is_enforced() {
    assert_eq!(
        explore_interleavings(&UvwConsensus::new(0, 1), 3),
        Err(ExploreError::StateSpaceExceeded(3))
    );
}

#[test]
fn solo_runs_terminate() {
    for (p, q) in INPUTS {
        let uvw = UvwConsensus::new(p, q);
        for node in 0..2 {
            let s = solo_run(&uvw, node, 4).unwrap();
            assert_eq!(s.nodes[node].decision(), Some(if node == 0 { p } else { q }));
        }
        let lrw = LrwConsensus::new(vec![p, q]);
        let s = solo_run(&lrw, 1, 4).unwrap();
        assert_eq!(s.nodes[1].decision(), Some(q));
    }
}

#[test]
fn checker_flags_disagreement_and_rewrites() {
    let ex = Exploration {
        terminals: [vec![Some(0), Some(1)], vec![Some(2), Some(2)], vec![None, Some(0)]].into(),
        schedules: 3,
        write_once_violations: 1,
    };
    let v = check_consensus(&ex, &[0, 1]);
    assert!(v.contains(&ConsensusViolation::Disagreement(vec![Some(0), Some(1)])));
    assert!(v.contains(&ConsensusViolation::Invalid(vec![Some(2), Some(2)])));
    assert!(v.contains(&ConsensusViolation::Undecided(vec![None, Some(0)])));
    assert!(v.contains(&ConsensusViolation::WriteOnce(1)));
}

#[test]
fn decision_is_write_once() {
    let mut n = ConsensusNode::new(3);
    n.decide(3);
    n.decide(4);
    assert_eq!((n.decision(), n.write_count()), (Some(3), 2));
}

proptest! {
    #[test]
    fn lrw_consensus_agrees_for_any_inputs(inputs in proptest::collection::vec(-1000i64..1000, 1..=3)) {
        let ex = explore_interleavings(&LrwConsensus::new(inputs.clone()), 3).unwrap();
        prop_assert!(check_consensus(&ex, &inputs).is_empty());
    }

    #[test]
    fn uvw_agrees_for_any_inputs(p in -1000i64..1000, q in -1000i64..1000) {
        let ex = explore_interleavings(&UvwConsensus::new(p, q), 4).unwrap();
        prop_assert!(check_consensus(&ex, &[p, q]).is_empty());
    }
}
