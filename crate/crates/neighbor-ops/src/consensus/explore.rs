use std::collections::BTreeSet;

use lrw_core::Value;
use thiserror::Error;

use super::StepProtocol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("a schedule exceeded {0} steps")]
    StateSpaceExceeded(usize),
}

/// Every terminal state reachable by some schedule.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Exploration {
    /// Decision vectors, `None` for an undecided node.
    pub terminals: BTreeSet<Vec<Option<Value>>>,
    pub schedules: u64,
    /// Terminal states where some node's decision was written twice.
    pub write_once_violations: u64,
}

/// Depth-first enumeration of all schedules of `protocol`.
pub fn explore_interleavings<P: StepProtocol>(protocol: &P, max_steps: usize) -> Result<Exploration, ExploreError> {
    let mut out = Exploration::default();
    dfs(protocol, protocol.initial(), 0, max_steps, &mut out)?;
    Ok(out)
}

fn dfs<P: StepProtocol>(
    protocol: &P,
    state: P::State,
    depth: usize,
    max_steps: usize,
    out: &mut Exploration,
) -> Result<(), ExploreError> {
    let enabled: Vec<usize> = (0..protocol.node_count())
        .filter(|n| protocol.enabled(&state, *n))
        .collect();
    if enabled.is_empty() {
        let nodes = protocol.consensus_nodes(&state);
        out.schedules += 1;
        if nodes.iter().any(|n| n.write_count() > 1) {
            out.write_once_violations += 1;
        }
        out.terminals.insert(nodes.iter().map(|n| n.decision()).collect());
        return Ok(());
    }
    if depth >= max_steps {
        return Err(ExploreError::StateSpaceExceeded(max_steps));
    }
    for node in enabled {
        let mut next = state.clone();
        protocol.step(&mut next, node);
        dfs(protocol, next, depth + 1, max_steps, out)?;
    }
    Ok(())
}

/// Runs `node` alone until it has no steps left.
pub fn solo_run<P: StepProtocol>(protocol: &P, node: usize, max_steps: usize) -> Result<P::State, ExploreError> {
    let mut state = protocol.initial();
    for _ in 0..max_steps {
        if !protocol.enabled(&state, node) {
            return Ok(state);
        }
        protocol.step(&mut state, node);
    }
    if protocol.enabled(&state, node) {
        return Err(ExploreError::StateSpaceExceeded(max_steps));
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConsensusViolation {
    Undecided(Vec<Option<Value>>),
    Disagreement(Vec<Option<Value>>),
    Invalid(Vec<Option<Value>>),
    WriteOnce(u64),
}

/// Termination, agreement and validity over every terminal, plus write-once.
pub fn check_consensus(exploration: &Exploration, inputs: &[Value]) -> Vec<ConsensusViolation> {
    let mut violations = Vec::new();
    for vector in &exploration.terminals {
        if vector.iter().any(Option::is_none) {
            violations.push(ConsensusViolation::Undecided(vector.clone()));
            continue;
        }
        let decided: BTreeSet<Value> = vector.iter().flatten().copied().collect();
        if decided.len() > 1 {
            violations.push(ConsensusViolation::Disagreement(vector.clone()));
        }
        if decided.iter().any(|d| !inputs.contains(d)) {
            violations.push(ConsensusViolation::Invalid(vector.clone()));
        }
    }
    if exploration.write_once_violations > 0 {
        violations.push(ConsensusViolation::WriteOnce(exploration.write_once_violations));
    }
    violations
}
