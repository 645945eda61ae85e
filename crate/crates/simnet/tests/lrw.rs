use std::sync::Arc;

use lrw_core::protocol::InvokeRequest;
use lrw_core::{
    ConfigError, Evaluation, LrwSpec, NodeId, Outcome, SpecError, SpecRegistry, TimerConfig,
};
use simnet::{
    run_lrw, run_scenario, LrwScenario, Primitive, RadioModel, RecordKind, SimError, Topology,
};

fn registry() -> (Arc<SpecRegistry>, lrw_core::SpecId) {
    let mut reg = SpecRegistry::new();
    let id = reg.register(LrwSpec::new(
        "set-x",
        &["x"],
        &["x"],
        8,
        |store, args| Evaluation::Respond {
            r: store.value("x"),
            writes: vec![args[0]],
        },
        |_| true,
    ));
    (Arc::new(reg), id)
}

fn star_scenario(k: u32, loss: f64, seed: u64) -> LrwScenario {
    let (specs, id) = registry();
    let mut sc = LrwScenario::new(Topology::star(k), specs);
    sc.radio = RadioModel::with_loss(loss);
    sc.seed = seed;
    sc.invocations = vec![(NodeId(0), InvokeRequest::new(id, vec![5]))];
    sc
}

fn outcomes(trace: &simnet::Trace) -> Vec<Outcome> {
    trace.of_kind(RecordKind::Return).filter_map(|r| r.outcome()).collect()
}

#[test]
fn lossless_op_sends_one_init_and_k_accepts() {
    let run = run_lrw(&star_scenario(6, 0.0, 42), None).unwrap();
    let sends: Vec<_> = run.trace.of_kind(RecordKind::Send).map(|r| r.msg().unwrap()).collect();
    assert_eq!(sends.len(), 7);
    assert_eq!(sends.iter().filter(|m| **m == "InitMsg").count(), 1);
    assert_eq!(sends.iter().filter(|m| **m == "AcceptMsg").count(), 6);
    assert_eq!(outcomes(&run.trace), vec![Outcome::Success]);
    assert_eq!(run.trace.count(RecordKind::Commit), 6);
    for k in 1..=6 {
        assert_eq!(run.stores[&NodeId(k)].get("x"), Some(5));
    }
    assert!(run.trace.check_causality().is_ok());
}

#[test]
fn total_loss_fails_after_abort_timeout() {
    let trace = run_scenario(&star_scenario(6, 1.0, 42)).unwrap();
    assert_eq!(outcomes(&trace), vec![Outcome::Failed]);
    let ret = trace.of_kind(RecordKind::Return).next().unwrap();
    assert_eq!(ret.time_us, 200_000);
    let to_neighbors = trace
        .of_kind(RecordKind::Deliver)
        .filter(|r| r.node != NodeId(0))
        .count();
    assert_eq!(to_neighbors, 0);
    assert_eq!(trace.count(RecordKind::Commit), 0);
}

#[test]
fn same_seed_gives_identical_trace() {
    let a = run_scenario(&star_scenario(6, 0.2, 42)).unwrap();
    let b = run_scenario(&star_scenario(6, 0.2, 42)).unwrap();
    assert_eq!(a.to_export_string(), b.to_export_string());
}

#[test]
fn short_commit_is_rejected() {
    let mut sc = star_scenario(6, 0.0, 1);
    sc.timers = TimerConfig::from_ms(40, 100, 150);
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::InvalidConfig(ConfigError::CommitTooShort { .. }))
    ));
    sc.timers = TimerConfig::default();
    sc.radio.loss_prob = 2.0;
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::InvalidConfig(ConfigError::LossOutOfRange(_)))
    ));
}

#[test]
fn strict_payload_rejects_oversized_spec() {
    let mut reg = SpecRegistry::new();
    let id = reg.register(LrwSpec::new(
        "fat",
        &[],
        &["x"],
        64,
        |_, _| Evaluation::Respond { r: 0, writes: vec![0] },
        |_| true,
    ));
    let mut sc = LrwScenario::new(Topology::star(2), Arc::new(reg));
    sc.invocations = vec![(NodeId(0), InvokeRequest::new(id, vec![]))];
    sc.strict_payload = true;
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::Spec(SpecError::PayloadTooLarge { .. }))
    ));
    sc.strict_payload = false;
    assert!(run_scenario(&sc).is_ok());
}

#[test]
fn unicast_fanout_with_hardware_ack_completes() {
    let mut sc = star_scenario(4, 0.0, 9);
    sc.primitive = Primitive::UnicastFanout;
    sc.radio.unicast_hw_ack = true;
    let trace = run_scenario(&sc).unwrap();
    assert_eq!(outcomes(&trace), vec![Outcome::Success]);
    // Four unicast inits; every accept rides on an ack.
    assert_eq!(trace.count(RecordKind::Send), 4);
    assert_eq!(trace.count(RecordKind::Ack), 4);
    assert_eq!(trace.count(RecordKind::Commit), 4);
}

#[test]
fn contention_leaves_no_overlapping_engagement() {
    let (specs, id) = registry();
    let topo = Topology::testbed_31();
    let mut sc = LrwScenario::new(topo.clone(), specs);
    sc.invocations = topo
        .initiators()
        .iter()
        .map(|n| (*n, InvokeRequest::new(id, vec![n.0 as i64])))
        .collect();
    for seed in 0..20 {
        sc.seed = seed;
        let trace = run_scenario(&sc).unwrap();
        assert_eq!(trace.count(RecordKind::Invoke), 6);
        assert_eq!(trace.count(RecordKind::Return), 6);
        assert!(trace.check_causality().is_ok());
    }
}
