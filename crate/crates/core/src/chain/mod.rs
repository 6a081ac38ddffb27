//! Transformation chains.
//!
//! Translation runs in three stages:
//!
//! 1. [`flatten`] inlines call activities into one graph of actions and
//!    explicit gateways, with every object flow turned into a data
//!    [`Carrier`].
//! 2. [`synthesize_concurrency`] reduces the precedence order to its
//!    transitive reduction and inserts fork/join gateways wherever
//!    independent branches split or meet.
//! 3. [`build_chain`] binds each action to its implementation through the
//!    weave model and produces the typed [`TransformationChain`].

mod build;
mod concurrency;
mod dot;
mod flatten;
pub(crate) mod graph;
pub mod store;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::megamodel::ResourceId;
use crate::procmodel::{Direction, Pin};

pub use build::{build_chain, ChainError};
pub use concurrency::synthesize_concurrency;
pub use dot::export_dot;
pub use flatten::flatten;
pub use validate::validate_chain;

use graph::Dag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlatKind {
    Action,
    Fork,
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatNode {
    /// Qualified name: `<call>.<inner>` for inlined nodes.
    pub id: String,
    pub kind: FlatKind,
    pub implementation: Option<String>,
    pub pins: Vec<Pin>,
    pub synthesized: bool,
}

/// Where the data of a carrier comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CarrierSource {
    /// A parameter of the top-level process model.
    Parameter { name: String, direction: Direction },
    /// An object node or a pin-to-pin flow; `resource` is the name of the
    /// virtual model instance registered for it.
    Intermediate { resource: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Carrier {
    pub id: String,
    pub metamodel: String,
    pub source: CarrierSource,
}

/// An action pin attached to a carrier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PinFlow {
    pub node: String,
    pub pin: String,
    pub direction: Direction,
    pub carrier: String,
}

/// A process model with its hierarchy inlined.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlatGraph {
    pub name: String,
    pub nodes: BTreeMap<String, FlatNode>,
    pub control: BTreeSet<(String, String)>,
    pub carriers: BTreeMap<String, Carrier>,
    pub flows: Vec<PinFlow>,
}

impl FlatGraph {
    pub fn actions(&self) -> impl Iterator<Item = &FlatNode> {
        self.nodes.values().filter(|n| n.kind == FlatKind::Action)
    }

    pub fn gateways(&self) -> impl Iterator<Item = &FlatNode> {
        self.nodes.values().filter(|n| n.kind != FlatKind::Action)
    }

    pub fn writers(&self, carrier: &str) -> BTreeSet<&str> {
        self.flows
            .iter()
            .filter(|f| f.carrier == carrier && f.direction == Direction::Out)
            .map(|f| f.node.as_str())
            .collect()
    }

    pub fn readers(&self, carrier: &str) -> BTreeSet<&str> {
        self.flows
            .iter()
            .filter(|f| f.carrier == carrier && f.direction == Direction::In)
            .map(|f| f.node.as_str())
            .collect()
    }

    /// Control edges plus writer-to-reader data precedence.
    pub(crate) fn precedence(&self) -> Dag {
        let mut dag = Dag::new(self.nodes.keys().cloned());
        for (a, b) in &self.control {
            dag.add_edge(a, b);
        }
        for c in self.carriers.keys() {
            for w in self.writers(c) {
                for r in self.readers(c) {
                    if w != r {
                        dag.add_edge(w, r);
                    }
                }
            }
        }
        dag
    }

    /// Every ordered pair `(a, b)` of actions where `a` must finish before
    /// `b` starts.
    pub fn action_order(&self) -> BTreeSet<(String, String)> {
        order_pairs(&self.precedence(), |id| self.nodes[id].kind == FlatKind::Action)
    }
}

pub(crate) fn order_pairs(dag: &Dag, keep: impl Fn(&str) -> bool) -> BTreeSet<(String, String)> {
    let reach = dag.descendants();
    let mut out = BTreeSet::new();
    for a in 0..dag.len() {
        if !keep(&dag.names[a]) {
            continue;
        }
        for b in 0..dag.len() {
            if reach[a].contains(b) && keep(&dag.names[b]) {
                out.insert((dag.names[a].clone(), dag.names[b].clone()));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPin {
    pub name: String,
    pub metamodel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Step {
    pub id: String,
    #[serde(rename = "impl")]
    pub implementation: ResourceId,
    pub handler_kind: String,
    pub in_pins: Vec<StepPin>,
    pub out_pins: Vec<StepPin>,
}

impl Step {
    pub fn pin(&self, name: &str, direction: Direction) -> Option<&StepPin> {
        let pins = match direction {
            Direction::In => &self.in_pins,
            Direction::Out => &self.out_pins,
        };
        pins.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Binding {
    Unbound,
    LaunchParameter { name: String, direction: Direction },
    Intermediate { resource: ResourceId },
    Artifact { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataNode {
    pub id: String,
    pub metamodel: String,
    pub binding: Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayKind {
    Fork,
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gateway {
    pub id: String,
    pub kind: GatewayKind,
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ControlEdge {
    pub source: String,
    pub target: String,
}

/// `direction` is `in` for DataNode → step pin and `out` for step pin →
/// DataNode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataEdge {
    pub data: String,
    pub step: String,
    pub pin: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransformationChain {
    pub name: String,
    pub steps: Vec<Step>,
    pub data_nodes: Vec<DataNode>,
    pub gateways: Vec<Gateway>,
    pub control_edges: Vec<ControlEdge>,
    pub data_edges: Vec<DataEdge>,
}

impl TransformationChain {
    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn data_node(&self, id: &str) -> Option<&DataNode> {
        self.data_nodes.iter().find(|d| d.id == id)
    }

    pub fn gateway(&self, id: &str) -> Option<&Gateway> {
        self.gateways.iter().find(|g| g.id == id)
    }

    pub fn writers(&self, data: &str) -> BTreeSet<&str> {
        self.data_edges
            .iter()
            .filter(|e| e.data == data && e.direction == Direction::Out)
            .map(|e| e.step.as_str())
            .collect()
    }

    pub fn readers(&self, data: &str) -> BTreeSet<&str> {
        self.data_edges
            .iter()
            .filter(|e| e.data == data && e.direction == Direction::In)
            .map(|e| e.step.as_str())
            .collect()
    }

    /// Precedence over steps and gateways: control edges plus data
    /// writer-to-reader edges. Unknown edge endpoints are ignored.
    pub(crate) fn precedence(&self) -> Dag {
        let mut dag = Dag::new(
            self.steps.iter().map(|s| s.id.clone()).chain(self.gateways.iter().map(|g| g.id.clone())),
        );
        let known = |d: &Dag, n: &str| d.index.contains_key(n);
        for e in &self.control_edges {
            if known(&dag, &e.source) && known(&dag, &e.target) {
                dag.add_edge(&e.source, &e.target);
            }
        }
        for d in &self.data_nodes {
            for w in self.writers(&d.id) {
                for r in self.readers(&d.id) {
                    if w != r && known(&dag, w) && known(&dag, r) {
                        dag.add_edge(w, r);
                    }
                }
            }
        }
        dag
    }

    pub fn is_acyclic(&self) -> bool {
        self.precedence().topo_lex().is_some()
    }

    /// Ordered step pairs `(a, b)`: `a` always completes before `b`
    /// starts. Panics on cyclic chains.
    pub fn step_order(&self) -> BTreeSet<(String, String)> {
        let steps: BTreeSet<&str> = self.steps.iter().map(|s| s.id.as_str()).collect();
        order_pairs(&self.precedence(), |id| steps.contains(id))
    }

    pub fn predecessors(&self, node: &str) -> Vec<&str> {
        self.control_edges.iter().filter(|e| e.target == node).map(|e| e.source.as_str()).collect()
    }

    pub fn successors(&self, node: &str) -> Vec<&str> {
        self.control_edges.iter().filter(|e| e.source == node).map(|e| e.target.as_str()).collect()
    }
}
