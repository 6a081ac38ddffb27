use std::fmt::Write;

use super::{Megamodel, RelationKind, ResourceKind};

/// Graphviz rendering of the megamodel: metamodels as orange boxes,
/// transformations and executable specs in brown, other models in grey.
/// Conformance is dashed; input/output flow is solid.
pub fn to_dot(mgm: &Megamodel) -> String {
    let mut out = String::from("digraph megamodel {\n  rankdir=BT;\n  node [style=filled, fontname=\"Helvetica\"];\n");
    for res in mgm.resources() {
        let (shape, color) = match res.kind {
            ResourceKind::MetamodelDescriptor => ("box", "orange"),
            ResourceKind::Transformation | ResourceKind::ExecutableSpec => ("component", "burlywood"),
            ResourceKind::ModelInstance => ("note", "white"),
            ResourceKind::ProcessModel | ResourceKind::WeaveModel | ResourceKind::Chain => ("box", "lightgrey"),
        };
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{}\\n<{}>\", shape={shape}, fillcolor={color}];",
            res.id,
            escape(&res.name),
            res.kind
        );
    }
    for rel in mgm.relations() {
        let style = match rel.kind {
            RelationKind::ConformsTo => "dashed",
            RelationKind::InputOf | RelationKind::OutputOf => "solid",
            RelationKind::DerivedFrom | RelationKind::WeaveOf => "dotted",
        };
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [style={style}, label=\"{:?}\"];",
            rel.source, rel.target, rel.kind
        );
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
