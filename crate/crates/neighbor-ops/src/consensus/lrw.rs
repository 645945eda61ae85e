use std::sync::Arc;

use lrw_core::{Evaluation, LrwSpec, SpecId, SpecRegistry, Value, VarStore};

use super::{ConsensusNode, StepProtocol};

/// Sentinel for an unwritten decision register; never a valid input.
pub const OMEGA: Value = Value::MIN;
const REG: &str = "x";

/// Consensus among mutually adjacent nodes using one LRW each.
///
/// Each node's step is one LRW over all other nodes. At a neighbor, `f`
/// claims an empty register with the caller's input and reports the old
/// content. The caller decides its own register if already written, else the
/// first non-empty response, else its input, and writes the decision to its
/// own register.
#[derive(Clone, Debug)]
pub struct LrwConsensus {
    inputs: Vec<Value>,
    specs: Arc<SpecRegistry>,
    spec: SpecId,
}

#[derive(Clone, Debug)]
pub struct LrwConsensusState {
    pub stores: Vec<VarStore>,
    pub nodes: Vec<ConsensusNode>,
    pub done: Vec<bool>,
}

impl LrwConsensus {
    pub fn new(inputs: Vec<Value>) -> Self {
        assert!(!inputs.contains(&OMEGA), "inputs must differ from the empty sentinel");
        let mut reg = SpecRegistry::new();
        let spec = reg.register(LrwSpec::new(
            "claim",
            &[REG],
            &[REG],
            8,
            |store, args| {
                let x = store.value(REG);
                let claim = if x == OMEGA { args[0] } else { x };
                Evaluation::Respond { r: x, writes: vec![claim] }
            },
            |_| true,
        ));
        LrwConsensus {
            inputs,
            specs: Arc::new(reg),
            spec,
        }
    }
}

impl StepProtocol for LrwConsensus {
    type State = LrwConsensusState;

    fn initial(&self) -> LrwConsensusState {
        let n = self.inputs.len();
        LrwConsensusState {
            stores: vec![VarStore::with_values([(REG, OMEGA)]); n],
            nodes: self.inputs.iter().map(|v| ConsensusNode::new(*v)).collect(),
            done: vec![false; n],
        }
    }

    fn node_count(&self) -> usize {
        self.inputs.len()
    }

    fn enabled(&self, state: &LrwConsensusState, node: usize) -> bool {
        !state.done[node]
    }

    fn step(&self, state: &mut LrwConsensusState, node: usize) {
        let spec = self.specs.get(self.spec).expect("registered");
        let input = self.inputs[node];
        let mut responses = Vec::new();
        for j in (0..self.inputs.len()).filter(|j| *j != node) {
            let Ok(Evaluation::Respond { r, writes }) = spec.evaluate(&state.stores[j], &[input]) else {
                unreachable!("claim always responds")
            };
            let write = spec.tentative_write(writes).expect("arity matches");
            state.stores[j].write_through(&write);
            responses.push(r);
        }
        let own = state.stores[node].value(REG);
        let decision = if own != OMEGA {
            own
        } else {
            responses.into_iter().find(|r| *r != OMEGA).unwrap_or(input)
        };
        state.stores[node].set(REG, decision);
        state.nodes[node].decide(decision);
        state.done[node] = true;
    }

    fn consensus_nodes<'a>(&self, state: &'a LrwConsensusState) -> Vec<&'a ConsensusNode> {
        state.nodes.iter().collect()
    }
}
