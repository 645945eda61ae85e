use std::collections::{BTreeMap, BTreeSet};

use lrw_core::NodeId;

use crate::error::SimError;

/// Symmetric neighbor relation. `potential` is the fixed superset; `current`
/// is what the radio uses right now and only differs from `potential` under
/// churn or explicit `set_link` calls.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    potential: BTreeMap<NodeId, BTreeSet<NodeId>>,
    current: BTreeMap<NodeId, BTreeSet<NodeId>>,
    initiators: Vec<NodeId>,
    /// Link flips per potential link per second; `None` keeps links static.
    churn_rate: Option<f64>,
}

impl Topology {
    /// Builds from undirected edges. Self-loops are rejected.
    pub fn from_edges<I>(nodes: I, edges: &[(NodeId, NodeId)]) -> Result<Self, SimError>
    where
        I: IntoIterator<Item = NodeId>,
    {
        let mut potential: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.into_iter().map(|n| (n, BTreeSet::new())).collect();
        for &(a, b) in edges {
            if a == b {
                return Err(SimError::InvalidTopology(format!("self-loop at {a}")));
            }
            for n in [a, b] {
                if !potential.contains_key(&n) {
                    return Err(SimError::UnknownNode(n));
                }
            }
            potential.get_mut(&a).expect("checked").insert(b);
            potential.get_mut(&b).expect("checked").insert(a);
        }
        Ok(Topology {
            current: potential.clone(),
            potential,
            initiators: Vec::new(),
            churn_rate: None,
        })
    }

    /// Hub `0` with leaves `1..=k`. The hub is the suggested initiator.
    pub fn star(k: u32) -> Self {
        let edges: Vec<_> = (1..=k).map(|i| (NodeId(0), NodeId(i))).collect();
        Self::from_edges((0..=k).map(NodeId), &edges)
            .expect("star is well formed")
            .with_initiators(vec![NodeId(0)])
    }

    /// Nodes `1..=n`, all pairwise adjacent.
    pub fn clique(n: u32) -> Self {
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                edges.push((NodeId(a), NodeId(b)));
            }
        }
        Self::from_edges((1..=n).map(NodeId), &edges).expect("clique is well formed")
    }

    /// Nodes `1..=n` on a line; `i` and `j` are adjacent iff `0 < |i - j| <= radius`.
    pub fn band(n: u32, radius: u32) -> Self {
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n.min(a + radius) {
                edges.push((NodeId(a), NodeId(b)));
            }
        }
        Self::from_edges((1..=n).map(NodeId), &edges).expect("band is well formed")
    }

    /// 31 motes on a line, each within range of the three on either side,
    /// with initiators at every node `i` where `i mod 6 == 1`.
    pub fn testbed_31() -> Self {
        let initiators = (1..=31).filter(|i| i % 6 == 1).map(NodeId).collect();
        Self::band(31, 3).with_initiators(initiators)
    }

    pub fn with_initiators(mut self, initiators: Vec<NodeId>) -> Self {
        self.initiators = initiators;
        self
    }

    pub fn with_churn(mut self, flips_per_link_per_s: f64) -> Self {
        self.churn_rate = (flips_per_link_per_s > 0.0).then_some(flips_per_link_per_s);
        self
    }

    pub fn churn_rate(&self) -> Option<f64> {
        self.churn_rate
    }

    pub fn initiators(&self) -> &[NodeId] {
        &self.initiators
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.potential.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.potential.contains_key(&node)
    }

    /// Current neighbors; empty for unknown nodes.
    pub fn neighbors(&self, node: NodeId) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.current.get(&node).unwrap_or(&EMPTY)
    }

    pub fn potential(&self, node: NodeId) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.potential.get(&node).unwrap_or(&EMPTY)
    }

    /// Potential links as `(a, b)` with `a < b`, in sorted order.
    pub fn potential_links(&self) -> Vec<(NodeId, NodeId)> {
        self.potential
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (*a, *b)))
            .collect()
    }

    pub fn is_linked(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors(a).contains(&b)
    }

    /// Turns a potential link on or off in both directions.
    pub fn set_link(&mut self, a: NodeId, b: NodeId, up: bool) -> Result<(), SimError> {
        if !self.potential(a).contains(&b) {
            return Err(SimError::InvalidTopology(format!(
                "{a}-{b} is not a potential link"
            )));
        }
        for (x, y) in [(a, b), (b, a)] {
            let set = self.current.get_mut(&x).expect("potential implies current");
            if up {
                set.insert(y);
            } else {
                set.remove(&y);
            }
        }
        Ok(())
    }

    /// Whether two nodes share at least one potential neighbor.
    pub fn overlap(&self, a: NodeId, b: NodeId) -> bool {
        !self.potential(a).is_disjoint(self.potential(b))
    }

    pub fn is_symmetric(&self) -> bool {
        let sym = |m: &BTreeMap<NodeId, BTreeSet<NodeId>>| {
            m.iter()
                .all(|(a, ns)| ns.iter().all(|b| m.get(b).is_some_and(|bs| bs.contains(a))))
        };
        sym(&self.potential) && sym(&self.current)
    }

    /// Current links are a subset of potential links.
    pub fn within_potential(&self) -> bool {
        self.current
            .iter()
            .all(|(a, ns)| ns.is_subset(self.potential(*a)))
    }
}
