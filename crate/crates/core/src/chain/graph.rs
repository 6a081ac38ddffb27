use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Fixed-size bit set used for reachability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    pub fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }

    pub fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn union_with(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }
}

/// A directed graph over named nodes, indexed densely.
#[derive(Debug, Clone, Default)]
pub(crate) struct Dag {
    pub names: Vec<String>,
    pub index: BTreeMap<String, usize>,
    pub succ: Vec<BTreeSet<usize>>,
    pub pred: Vec<BTreeSet<usize>>,
}

impl Dag {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut dag = Self::default();
        for n in names {
            dag.add_node(n.into());
        }
        dag
    }

    pub fn add_node(&mut self, name: String) -> usize {
        if let Some(&i) = self.index.get(&name) {
            return i;
        }
        let i = self.names.len();
        self.index.insert(name.clone(), i);
        self.names.push(name);
        self.succ.push(BTreeSet::new());
        self.pred.push(BTreeSet::new());
        i
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn add_edge_idx(&mut self, a: usize, b: usize) {
        self.succ[a].insert(b);
        self.pred[b].insert(a);
    }

    /// Adds `a -> b`; both nodes must exist.
    pub fn add_edge(&mut self, a: &str, b: &str) {
        let (a, b) = (self.index[a], self.index[b]);
        self.add_edge_idx(a, b);
    }

    /// Kahn's algorithm, always taking the lexicographically smallest ready
    /// node. `None` when the graph has a cycle.
    pub fn topo_lex(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.pred.iter().map(BTreeSet::len).collect();
        let mut heap: BinaryHeap<Reverse<(&str, usize)>> = (0..self.len())
            .filter(|&i| indeg[i] == 0)
            .map(|i| Reverse((self.names[i].as_str(), i)))
            .collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(Reverse((_, i))) = heap.pop() {
            order.push(i);
            for &j in &self.succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    heap.push(Reverse((self.names[j].as_str(), j)));
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    /// Strict descendants of every node. Panics on cycles.
    pub fn descendants(&self) -> Vec<Bits> {
        let order = self.topo_lex().expect("graph is acyclic");
        let mut reach = vec![Bits::new(self.len()); self.len()];
        for &u in order.iter().rev() {
            let mut acc = Bits::new(self.len());
            for &v in &self.succ[u] {
                acc.insert(v);
                acc.union_with(&reach[v]);
            }
            reach[u] = acc;
        }
        reach
    }

    /// The unique minimal subgraph with the same reachability.
    pub fn transitive_reduction(&self) -> Dag {
        let reach = self.descendants();
        let mut out = Dag::new(self.names.iter().cloned());
        for u in 0..self.len() {
            for &v in &self.succ[u] {
                let implied = self.succ[u].iter().any(|&w| w != v && reach[w].contains(v));
                if !implied {
                    out.add_edge_idx(u, v);
                }
            }
        }
        out
    }
}
