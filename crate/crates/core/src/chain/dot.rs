use std::fmt::Write;

use super::{Binding, GatewayKind, TransformationChain};
use crate::procmodel::Direction;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", escape(s))
}

/// A quoted two-line label.
fn label(first: &str, second: &str) -> String {
    format!("\"{}\\n{}\"", escape(first), escape(second))
}

/// Renders a chain as a DOT digraph: steps are boxes, data nodes ellipses
/// and gateways black bars. Output is deterministic.
pub fn export_dot(chain: &TransformationChain) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(&chain.name)).unwrap();
    writeln!(out, "  rankdir=TB;").unwrap();
    let mut steps: Vec<_> = chain.steps.iter().collect();
    steps.sort_by(|a, b| a.id.cmp(&b.id));
    for s in steps {
        writeln!(
            out,
            "  {} [shape=box, label={}];",
            quote(&s.id),
            label(&s.id, &format!("[{}]", s.handler_kind))
        )
        .unwrap();
    }
    let mut gateways: Vec<_> = chain.gateways.iter().collect();
    gateways.sort_by(|a, b| a.id.cmp(&b.id));
    for g in gateways {
        let kind = match g.kind {
            GatewayKind::Fork => "fork",
            GatewayKind::Join => "join",
        };
        writeln!(
            out,
            "  {} [shape=rect, style=filled, fillcolor=black, height=0.08, width=1.2, label=\"\", xlabel={}];",
            quote(&g.id),
            quote(kind)
        )
        .unwrap();
    }
    let mut data: Vec<_> = chain.data_nodes.iter().collect();
    data.sort_by(|a, b| a.id.cmp(&b.id));
    for d in data {
        let style = match d.binding {
            Binding::LaunchParameter { .. } => "solid",
            _ => "dashed",
        };
        writeln!(
            out,
            "  {} [shape=ellipse, style={style}, label={}];",
            quote(&format!("data:{}", d.id)),
            label(&d.id, &format!(": {}", d.metamodel))
        )
        .unwrap();
    }
    let mut control = chain.control_edges.clone();
    control.sort();
    for e in control {
        writeln!(out, "  {} -> {};", quote(&e.source), quote(&e.target)).unwrap();
    }
    let mut data_edges = chain.data_edges.clone();
    data_edges.sort();
    for e in data_edges {
        let data = quote(&format!("data:{}", e.data));
        let (a, b) = match e.direction {
            Direction::In => (data, quote(&e.step)),
            Direction::Out => (quote(&e.step), data),
        };
        writeln!(out, "  {a} -> {b} [style=dotted, label={}];", quote(&e.pin)).unwrap();
    }
    out.push_str("}\n");
    out
}
