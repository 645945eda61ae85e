//! The counter workload: every invitee adds `increment` to its `x` unless its
//! `veto` flag is set, and the initiator accepts only if no old counter
//! exceeds `accept_max`.

use std::collections::BTreeMap;

use lrw_core::{Evaluation, LrwSpec, NodeId, SpecId, SpecRegistry, VarStore};
use rand::Rng;
use simnet::{substream, Topology};

use crate::config::WorkloadConfig;

/// Workload draws use streams with this bit set, disjoint from trial streams.
pub const WORKLOAD_STREAM: u64 = 1 << 63;

pub fn counter_spec(accept_max: Option<i64>) -> LrwSpec {
    LrwSpec::new(
        "counter",
        &["x", "veto"],
        &["x"],
        8,
        |store, args| {
            if store.value("veto") != 0 {
                return Evaluation::Negative;
            }
            let x = store.value("x");
            Evaluation::Respond {
                r: x,
                writes: vec![x + args.first().copied().unwrap_or(1)],
            }
        },
        move |responses| accept_max.is_none_or(|max| responses.iter().all(|&r| r <= max)),
    )
}

pub fn counter_registry(accept_max: Option<i64>) -> (SpecRegistry, SpecId) {
    let mut specs = SpecRegistry::new();
    let id = specs.register(counter_spec(accept_max));
    (specs, id)
}

/// Initial stores for one trial, drawn from the trial's workload stream.
pub fn initial_stores(
    topology: &Topology,
    workload: &WorkloadConfig,
    seed: u64,
    trial: u64,
) -> BTreeMap<NodeId, VarStore> {
    let mut rng = substream(seed, WORKLOAD_STREAM | trial);
    topology
        .nodes()
        .map(|id| {
            let x = rng.gen_range(0..=workload.initial_max);
            let veto = i64::from(rng.gen_bool(workload.veto_prob));
            (id, VarStore::with_values([("x", x), ("veto", veto)]))
        })
        .collect()
}
