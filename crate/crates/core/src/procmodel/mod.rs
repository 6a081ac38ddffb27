//! The process-model language: a textual activity-diagram subset.
//!
//! A document is JSON with top-level keys `name`, `parameters`, `nodes`,
//! `edges` and `calls`. Pins are referenced as `"<node>.<pin>"`; parameters
//! and object nodes by their bare name. Whether a pin reference means the
//! input or the output pin follows from the edge role: sources are output
//! pins, targets are input pins.

mod resolve;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Diagnostic;

pub use resolve::{load_library, resolve_calls, Library, ResolveError, ResolvedProcessModel};
pub use validate::validate_pm;

/// File suffix of process-model documents.
pub const PM_EXTENSION: &str = ".pm.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::In => "in",
            Direction::Out => "out",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pin {
    pub name: String,
    pub direction: Direction,
    pub metamodel: String,
}

impl Pin {
    pub fn new(name: impl Into<String>, direction: Direction, metamodel: impl Into<String>) -> Self {
        Self { name: name.into(), direction, metamodel: metamodel.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "initial")]
    Initial,
    #[serde(rename = "final")]
    Final,
    #[serde(rename = "action")]
    Action,
    #[serde(rename = "call")]
    CallActivity,
    #[serde(rename = "fork")]
    Fork,
    #[serde(rename = "join")]
    Join,
    #[serde(rename = "object")]
    ObjectNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Workspace-relative path of the implementing transformation or
    /// executable spec (actions only).
    #[serde(rename = "impl", default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callee: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pins: Vec<Pin>,
    /// Type of the data an object node carries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metamodel: Option<String>,
}

impl Node {
    pub fn new(name: impl Into<String>, kind: NodeKind) -> Self {
        Self { name: name.into(), kind, implementation: None, callee: None, pins: Vec::new(), metamodel: None }
    }

    pub fn action(name: impl Into<String>, implementation: impl Into<String>, pins: Vec<Pin>) -> Self {
        Self { implementation: Some(implementation.into()), pins, ..Self::new(name, NodeKind::Action) }
    }

    pub fn call(name: impl Into<String>, callee: impl Into<String>, pins: Vec<Pin>) -> Self {
        Self { callee: Some(callee.into()), pins, ..Self::new(name, NodeKind::CallActivity) }
    }

    pub fn object(name: impl Into<String>, metamodel: impl Into<String>) -> Self {
        Self { metamodel: Some(metamodel.into()), ..Self::new(name, NodeKind::ObjectNode) }
    }

    pub fn pin(&self, name: &str, direction: Direction) -> Option<&Pin> {
        self.pins.iter().find(|p| p.name == name && p.direction == direction)
    }

    pub fn is_executable(&self) -> bool {
        matches!(self.kind, NodeKind::Action | NodeKind::CallActivity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "control")]
    ControlFlow,
    #[serde(rename = "object")]
    ObjectFlow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub kind: EdgeKind,
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Edge {
    pub fn control(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self { kind: EdgeKind::ControlFlow, source: source.into(), target: target.into(), name: None }
    }

    pub fn object(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self { kind: EdgeKind::ObjectFlow, source: source.into(), target: target.into(), name: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessModel {
    pub name: String,
    #[serde(default)]
    pub parameters: Vec<Pin>,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    /// Names of the process models this one may invoke as call activities.
    #[serde(default)]
    pub calls: Vec<String>,
}

/// One end of an object flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint<'a> {
    Pin { node: &'a Node, pin: &'a Pin },
    Parameter(&'a Pin),
    ObjectNode(&'a Node),
}

impl<'a> Endpoint<'a> {
    pub fn metamodel(&self) -> &'a str {
        match self {
            Endpoint::Pin { pin, .. } | Endpoint::Parameter(pin) => &pin.metamodel,
            Endpoint::ObjectNode(node) => node.metamodel.as_deref().unwrap_or(""),
        }
    }

    /// Name of the graph node owning this endpoint; parameters own
    /// themselves.
    pub fn owner(&self) -> &'a str {
        match self {
            Endpoint::Pin { node, .. } | Endpoint::ObjectNode(node) => &node.name,
            Endpoint::Parameter(pin) => &pin.name,
        }
    }
}

/// How an object flow carries its data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CarrierRef {
    Parameter(String),
    ObjectNode(String),
    /// A pin-to-pin flow; the carrier is an intermediate model with this
    /// local name (without the PM prefix).
    Direct(String),
}

#[derive(Debug, Error)]
pub enum PmError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("duplicate node name `{0}`")]
    DuplicateNodeName(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<PmError> },
}

impl PmError {
    pub fn in_file(self, path: &Path) -> PmError {
        match self {
            already @ PmError::InFile { .. } => already,
            other => PmError::InFile { path: path.to_path_buf(), source: Box::new(other) },
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            PmError::InFile { path, source } => match source.as_ref() {
                PmError::Syntax { line, column, message } => {
                    Diagnostic::error(format!("syntax error: {message}"))
                        .at(format!("{}:{line}:{column}", path.display()))
                }
                other => Diagnostic::error(other.to_string()).at(path.display().to_string()),
            },
            other => Diagnostic::error(other.to_string()),
        }
    }
}

/// Parses a process-model document. References stay symbolic.
pub fn parse_pm(text: &str) -> Result<ProcessModel, PmError> {
    let pm: ProcessModel = serde_json::from_str(text).map_err(|e| PmError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut seen = BTreeSet::new();
    for node in &pm.nodes {
        if !seen.insert(node.name.as_str()) {
            return Err(PmError::DuplicateNodeName(node.name.clone()));
        }
    }
    Ok(pm)
}

pub fn parse_pm_file(path: &Path) -> Result<ProcessModel, PmError> {
    let text = std::fs::read_to_string(path).map_err(|e| PmError::from(e).in_file(path))?;
    parse_pm(&text).map_err(|e| e.in_file(path))
}

/// Canonical text of a process model; [`parse_pm`] reads it back unchanged.
pub fn print_pm(pm: &ProcessModel) -> String {
    let mut s = serde_json::to_string_pretty(pm).expect("process model serializes");
    s.push('\n');
    s
}

impl ProcessModel {
    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn parameter(&self, name: &str) -> Option<&Pin> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn control_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::ControlFlow)
    }

    pub fn object_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::ObjectFlow)
    }

    /// Resolves an object-flow endpoint in source (`as_source`) or target
    /// role.
    pub fn endpoint(&self, reference: &str, as_source: bool) -> Result<Endpoint<'_>, String> {
        let pin_dir = if as_source { Direction::Out } else { Direction::In };
        let param_dir = if as_source { Direction::In } else { Direction::Out };
        if let Some((node_name, pin_name)) = reference.split_once('.') {
            let node = self.node(node_name).ok_or_else(|| format!("unknown node `{node_name}`"))?;
            if !node.is_executable() {
                return Err(format!("`{node_name}` has no pins"));
            }
            return match node.pin(pin_name, pin_dir) {
                Some(pin) => Ok(Endpoint::Pin { node, pin }),
                None => Err(format!("`{node_name}` has no {pin_dir} pin `{pin_name}`")),
            };
        }
        if let Some(node) = self.node(reference) {
            return match node.kind {
                NodeKind::ObjectNode => Ok(Endpoint::ObjectNode(node)),
                _ => Err(format!("`{reference}` is not an object node or parameter")),
            };
        }
        match self.parameter(reference) {
            Some(p) if p.direction == param_dir => Ok(Endpoint::Parameter(p)),
            Some(_) => Err(format!(
                "parameter `{reference}` cannot be the {} of an object flow",
                if as_source { "source" } else { "target" }
            )),
            None => Err(format!("unknown reference `{reference}`")),
        }
    }

    /// Data carrier of an object flow, given both ends resolve.
    pub fn carrier_of(&self, edge: &Edge) -> Option<CarrierRef> {
        let src = self.endpoint(&edge.source, true).ok()?;
        let dst = self.endpoint(&edge.target, false).ok()?;
        Some(match (src, dst) {
            (Endpoint::Parameter(p), _) | (_, Endpoint::Parameter(p)) => CarrierRef::Parameter(p.name.clone()),
            (Endpoint::ObjectNode(n), _) | (_, Endpoint::ObjectNode(n)) => CarrierRef::ObjectNode(n.name.clone()),
            (Endpoint::Pin { .. }, Endpoint::Pin { .. }) => CarrierRef::Direct(match &edge.name {
                Some(name) => name.clone(),
                None => format!("{}__{}", edge.source, edge.target),
            }),
        })
    }

    /// Virtual-resource names of every intermediate model this PM needs:
    /// one per pin-to-pin flow and one per object node, mapped to the
    /// carried metamodel name.
    pub fn intermediates(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for node in self.nodes_of(NodeKind::ObjectNode) {
            out.insert(format!("{}.{}", self.name, node.name), node.metamodel.clone().unwrap_or_default());
        }
        for edge in self.object_edges() {
            if let (Some(CarrierRef::Direct(local)), Ok(src)) = (self.carrier_of(edge), self.endpoint(&edge.source, true)) {
                out.insert(format!("{}.{local}", self.name), src.metamodel().to_string());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{
        "name": "tiny",
        "nodes": [
            {"name": "start", "kind": "initial"},
            {"name": "a", "kind": "action", "impl": "t.process"},
            {"name": "end", "kind": "final"}
        ],
        "edges": [
            {"kind": "control", "source": "start", "target": "a"},
            {"kind": "control", "source": "a", "target": "end"}
        ]
    }"#;

    #[test]
    fn parses_minimal_document() {
        let pm = parse_pm(MINIMAL).unwrap();
        assert_eq!(pm.nodes.len(), 3);
        assert_eq!(pm.node("a").unwrap().implementation.as_deref(), Some("t.process"));
        assert!(pm.calls.is_empty());
    }

    #[test]
    fn duplicate_node_names_rejected() {
        let text = MINIMAL.replace(r#""name": "end""#, r#""name": "a""#);
        assert!(matches!(parse_pm(&text), Err(PmError::DuplicateNodeName(n)) if n == "a"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_pm("{\n  \"name\": \"x\",\n  \"nodes\": [ }").unwrap_err();
        match err {
            PmError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_pm(r#"{"name":"x","nodes":[],"bogus":1}"#), Err(PmError::Syntax { .. })));
    }

    #[test]
    fn endpoint_roles() {
        let pm = ProcessModel {
            name: "p".into(),
            parameters: vec![Pin::new("In", Direction::In, "m"), Pin::new("Out", Direction::Out, "m")],
            nodes: vec![
                Node::action("a", "a.process", vec![Pin::new("x", Direction::In, "m"), Pin::new("x", Direction::Out, "m")]),
                Node::object("buf", "m"),
            ],
            edges: vec![],
            calls: vec![],
        };
        assert!(matches!(pm.endpoint("a.x", true), Ok(Endpoint::Pin { pin, .. }) if pin.direction == Direction::Out));
        assert!(matches!(pm.endpoint("a.x", false), Ok(Endpoint::Pin { pin, .. }) if pin.direction == Direction::In));
        assert!(matches!(pm.endpoint("In", true), Ok(Endpoint::Parameter(_))));
        assert!(pm.endpoint("In", false).is_err());
        assert!(matches!(pm.endpoint("buf", false), Ok(Endpoint::ObjectNode(_))));
        assert!(pm.endpoint("a.y", true).is_err());
    }

    #[test]
    fn intermediate_names_follow_pin_references() {
        let pm = ProcessModel {
            name: "NSDesign".into(),
            parameters: vec![],
            nodes: vec![
                Node::action("Decompose", "d.process", vec![Pin::new("out", Direction::Out, "solutionmap")]),
                Node::action("SelectVNFs", "s.process", vec![Pin::new("in", Direction::In, "solutionmap")]),
            ],
            edges: vec![Edge::object("Decompose.out", "SelectVNFs.in")],
            calls: vec![],
        };
        let names = pm.intermediates();
        assert_eq!(names.get("NSDesign.Decompose.out__SelectVNFs.in").map(String::as_str), Some("solutionmap"));
    }

    fn ident() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9_]{0,6}"
    }

    fn pin() -> impl Strategy<Value = Pin> {
        (ident(), any::<bool>(), ident()).prop_map(|(n, d, m)| {
            Pin::new(n, if d { Direction::In } else { Direction::Out }, m)
        })
    }

    fn node() -> impl Strategy<Value = Node> {
        (ident(), 0u8..7, prop::option::of(ident()), prop::collection::vec(pin(), 0..3)).prop_map(
            |(name, k, extra, pins)| match k {
                0 => Node::new(name, NodeKind::Initial),
                1 => Node::new(name, NodeKind::Final),
                2 => Node::action(name, extra.unwrap_or_default() + ".process", pins),
                3 => Node::call(name, extra.unwrap_or_default(), pins),
                4 => Node::new(name, NodeKind::Fork),
                5 => Node::new(name, NodeKind::Join),
                _ => Node::object(name, extra.unwrap_or_default()),
            },
        )
    }

    fn edge() -> impl Strategy<Value = Edge> {
        (any::<bool>(), ident(), ident(), prop::option::of(ident())).prop_map(|(c, s, t, n)| Edge {
            kind: if c { EdgeKind::ControlFlow } else { EdgeKind::ObjectFlow },
            source: s,
            target: t,
            name: n,
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(
            name in ident(),
            parameters in prop::collection::vec(pin(), 0..3),
            nodes in prop::collection::vec(node(), 0..8),
            edges in prop::collection::vec(edge(), 0..8),
            calls in prop::collection::vec(ident(), 0..3),
        ) {
            let mut seen = BTreeSet::new();
            let nodes: Vec<Node> = nodes.into_iter().filter(|n| seen.insert(n.name.clone())).collect();
            let pm = ProcessModel { name, parameters, nodes, edges, calls };
            prop_assert_eq!(parse_pm(&print_pm(&pm)).unwrap(), pm);
        }
    }
}
