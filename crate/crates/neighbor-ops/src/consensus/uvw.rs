use lrw_core::Value;

use super::{ConsensusNode, StepProtocol};

/// Two-node consensus from multi-variable write-all that includes the
/// writer's own copy. `p` writes its input to `u` and `v`; `q` writes its
/// input to `v` and `w`. Both then read their local copies and decide.
#[derive(Clone, Debug)]
pub struct UvwConsensus {
    p_input: Value,
    q_input: Value,
}

/// Local copies of `(u, v, w)`; `None` is the initial empty value.
pub type Copies = (Option<Value>, Option<Value>, Option<Value>);

#[derive(Clone, Debug)]
pub struct UvwState {
    pub copies: [Copies; 2],
    pub nodes: [ConsensusNode; 2],
    /// Steps taken: 0 before writing, 1 after writing, 2 after deciding.
    pub pc: [u8; 2],
}

const P: usize = 0;

impl UvwConsensus {
    pub fn new(p_input: Value, q_input: Value) -> Self {
        UvwConsensus { p_input, q_input }
    }

    fn decide(&self, node: usize, (u, v, w): Copies) -> Value {
        let (mine, other) = if node == P {
            (self.p_input, w)
        } else {
            (self.q_input, u)
        };
        match other {
            // The other node has not written: we were first.
            None => mine,
            // The other node wrote after us and overwrote `v`: we were first.
            Some(_) if v != Some(mine) => mine,
            // `v` still holds our input, so the other node wrote first or
            // both inputs agree.
            Some(theirs) => theirs,
        }
    }
}

impl StepProtocol for UvwConsensus {
    type State = UvwState;

    fn initial(&self) -> UvwState {
        UvwState {
            copies: [(None, None, None); 2],
            nodes: [ConsensusNode::new(self.p_input), ConsensusNode::new(self.q_input)],
            pc: [0, 0],
        }
    }

    fn node_count(&self) -> usize {
        2
    }

    fn enabled(&self, state: &UvwState, node: usize) -> bool {
        state.pc[node] < 2
    }

    fn step(&self, state: &mut UvwState, node: usize) {
        match state.pc[node] {
            0 => {
                for copy in state.copies.iter_mut() {
                    if node == P {
                        copy.0 = Some(self.p_input);
                        copy.1 = Some(self.p_input);
                    } else {
                        copy.1 = Some(self.q_input);
                        copy.2 = Some(self.q_input);
                    }
                }
            }
            1 => {
                let d = self.decide(node, state.copies[node]);
                state.nodes[node].decide(d);
            }
            _ => return,
        }
        state.pc[node] += 1;
    }

    fn consensus_nodes<'a>(&self, state: &'a UvwState) -> Vec<&'a ConsensusNode> {
        state.nodes.iter().collect()
    }
}
