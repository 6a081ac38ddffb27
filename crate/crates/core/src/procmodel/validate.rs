use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Direction, EdgeKind, Endpoint, NodeKind, ProcessModel};
use crate::diag::Diagnostic;

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['.', '#']) && !name.chars().any(char::is_whitespace)
}

/// Structural well-formedness checks. An empty result means the model can
/// be flattened and executed with token semantics.
pub fn validate_pm(pm: &ProcessModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut err = |loc: &str, msg: String| diags.push(Diagnostic::error(msg).at(format!("{}.{loc}", pm.name)));

    if !valid_name(&pm.name) {
        err("", format!("invalid process model name `{}`", pm.name));
    }

    let initials = pm.nodes_of(NodeKind::Initial).count();
    if initials != 1 {
        err("", format!("expected exactly one initial node, found {initials}"));
    }
    if pm.nodes_of(NodeKind::Final).count() == 0 {
        err("", "no final node".to_string());
    }

    let mut names = BTreeSet::new();
    for node in &pm.nodes {
        if !names.insert(node.name.as_str()) {
            err(&node.name, format!("duplicate node name `{}`", node.name));
        }
        if !valid_name(&node.name) {
            err(&node.name, format!("invalid node name `{}` (no `.`, `#` or spaces)", node.name));
        }
        match node.kind {
            NodeKind::Action if node.implementation.as_deref().is_none_or(str::is_empty) => {
                err(&node.name, "action without implementation".into())
            }
            NodeKind::CallActivity => match node.callee.as_deref() {
                None | Some("") => err(&node.name, "call activity without callee".into()),
                Some(callee) if !pm.calls.iter().any(|c| c == callee) => {
                    err(&node.name, format!("callee `{callee}` is not listed in `calls`"))
                }
                _ => {}
            },
            NodeKind::ObjectNode if node.metamodel.as_deref().is_none_or(str::is_empty) => {
                err(&node.name, "object node without metamodel".into())
            }
            _ => {}
        }
        if !node.pins.is_empty() && !node.is_executable() {
            err(&node.name, "only actions and call activities carry pins".into());
        }
        let mut pin_keys = BTreeSet::new();
        for pin in &node.pins {
            if !pin_keys.insert((pin.name.as_str(), pin.direction)) {
                err(&node.name, format!("duplicate {} pin `{}`", pin.direction, pin.name));
            }
            if !valid_name(&pin.name) {
                err(&node.name, format!("invalid pin name `{}`", pin.name));
            }
            if pin.metamodel.is_empty() {
                err(&node.name, format!("pin `{}` has no metamodel", pin.name));
            }
        }
    }
    let mut params = BTreeSet::new();
    for p in &pm.parameters {
        if !params.insert(p.name.as_str()) {
            err(&p.name, format!("duplicate parameter `{}`", p.name));
        }
        if !valid_name(&p.name) {
            err(&p.name, format!("invalid parameter name `{}`", p.name));
        }
        if names.contains(p.name.as_str()) {
            err(&p.name, format!("parameter `{}` clashes with a node name", p.name));
        }
        if p.metamodel.is_empty() {
            err(&p.name, format!("parameter `{}` has no metamodel", p.name));
        }
    }

    // Graph over node names and parameter names, combining control and
    // data precedence.
    let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut control_in: BTreeMap<&str, usize> = BTreeMap::new();
    let mut control_out: BTreeMap<&str, usize> = BTreeMap::new();
    // Flow counts per (node, pin, direction), per out-parameter and per
    // object node producer.
    let mut pin_flows: BTreeMap<(&str, &str, Direction), usize> = BTreeMap::new();
    let mut out_param_flows: BTreeMap<&str, usize> = BTreeMap::new();
    let mut object_producers: BTreeMap<&str, usize> = BTreeMap::new();

    for edge in &pm.edges {
        let loc = format!("{}->{}", edge.source, edge.target);
        if edge.source == edge.target {
            err(&loc, "self-loop".into());
            continue;
        }
        match edge.kind {
            EdgeKind::ControlFlow => {
                if let Some(name) = &edge.name {
                    if !valid_name(name) {
                        err(&loc, format!("invalid edge name `{name}`"));
                    }
                }
                let (Some(src), Some(dst)) = (pm.node(&edge.source), pm.node(&edge.target)) else {
                    err(&loc, "control flow endpoint is not a node".into());
                    continue;
                };
                if src.kind == NodeKind::ObjectNode || dst.kind == NodeKind::ObjectNode {
                    err(&loc, "control flow cannot touch an object node".into());
                    continue;
                }
                if src.kind == NodeKind::Final {
                    err(&loc, "final node has an outgoing edge".into());
                }
                if dst.kind == NodeKind::Initial {
                    err(&loc, "initial node has an incoming edge".into());
                }
                *control_out.entry(src.name.as_str()).or_default() += 1;
                *control_in.entry(dst.name.as_str()).or_default() += 1;
                succ.entry(&src.name).or_default().insert(&dst.name);
            }
            EdgeKind::ObjectFlow => {
                let src = pm.endpoint(&edge.source, true);
                let dst = pm.endpoint(&edge.target, false);
                let (src, dst) = match (src, dst) {
                    (Ok(s), Ok(d)) => (s, d),
                    (s, d) => {
                        for e in [s.err(), d.err()].into_iter().flatten() {
                            err(&loc, e);
                        }
                        continue;
                    }
                };
                let pin_end = |e: &Endpoint| matches!(e, Endpoint::Pin { .. });
                if !pin_end(&src) && !pin_end(&dst) {
                    err(&loc, "object flow must have a pin at one end".into());
                    continue;
                }
                if let Some(name) = &edge.name {
                    if !valid_name(name) || names.contains(name.as_str()) {
                        err(&loc, format!("invalid or clashing flow name `{name}`"));
                    }
                }
                if src.metamodel() != dst.metamodel() {
                    err(
                        &loc,
                        format!("pin metamodel mismatch: `{}` vs `{}`", src.metamodel(), dst.metamodel()),
                    );
                }
                for (end, dir) in [(&src, Direction::Out), (&dst, Direction::In)] {
                    match end {
                        Endpoint::Pin { node, pin } => {
                            *pin_flows.entry((&node.name, &pin.name, dir)).or_default() += 1;
                        }
                        Endpoint::Parameter(p) if dir == Direction::In => {
                            *out_param_flows.entry(&p.name).or_default() += 1;
                        }
                        Endpoint::ObjectNode(n) if dir == Direction::In => {
                            *object_producers.entry(&n.name).or_default() += 1;
                        }
                        _ => {}
                    }
                }
                succ.entry(src.owner()).or_default().insert(dst.owner());
            }
        }
    }

    for node in &pm.nodes {
        let ins = control_in.get(node.name.as_str()).copied().unwrap_or(0);
        let outs = control_out.get(node.name.as_str()).copied().unwrap_or(0);
        match node.kind {
            NodeKind::Fork if ins != 1 || outs < 2 => err(
                &node.name,
                format!("fork needs 1 incoming and at least 2 outgoing control edges (has {ins}/{outs})"),
            ),
            NodeKind::Join if ins < 2 || outs != 1 => err(
                &node.name,
                format!("join needs at least 2 incoming and 1 outgoing control edge (has {ins}/{outs})"),
            ),
            NodeKind::ObjectNode if !object_producers.contains_key(node.name.as_str()) => {
                err(&node.name, "object node has no producer".into())
            }
            _ => {}
        }
        for pin in &node.pins {
            let n = pin_flows.get(&(node.name.as_str(), pin.name.as_str(), pin.direction)).copied().unwrap_or(0);
            if n != 1 {
                err(
                    &format!("{}.{}", node.name, pin.name),
                    format!("{} pin must carry exactly one object flow (has {n})", pin.direction),
                );
            }
        }
    }
    for p in pm.parameters.iter().filter(|p| p.direction == Direction::Out) {
        let n = out_param_flows.get(p.name.as_str()).copied().unwrap_or(0);
        if n != 1 {
            err(&p.name, format!("output parameter must have exactly one producer (has {n})"));
        }
    }

    // Reachability from the initial node and the input parameters.
    let mut roots: Vec<&str> = pm.nodes_of(NodeKind::Initial).map(|n| n.name.as_str()).collect();
    roots.extend(pm.parameters.iter().filter(|p| p.direction == Direction::In).map(|p| p.name.as_str()));
    let mut seen: BTreeSet<&str> = roots.iter().copied().collect();
    let mut queue: VecDeque<&str> = roots.into_iter().collect();
    while let Some(n) = queue.pop_front() {
        for &m in succ.get(n).into_iter().flatten() {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    if initials == 1 {
        for node in &pm.nodes {
            if !seen.contains(node.name.as_str()) {
                err(&node.name, "not reachable from the initial node".into());
            }
        }
    }

    // Kahn's algorithm; whatever is left over sits on a cycle.
    let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
    for (&n, ms) in &succ {
        indeg.entry(n).or_default();
        for &m in ms {
            *indeg.entry(m).or_default() += 1;
        }
    }
    let mut ready: Vec<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    while let Some(n) = ready.pop() {
        indeg.remove(n);
        for &m in succ.get(n).into_iter().flatten() {
            if let Some(d) = indeg.get_mut(m) {
                *d -= 1;
                if *d == 0 {
                    ready.push(m);
                }
            }
        }
    }
    if !indeg.is_empty() {
        let members: Vec<&str> = indeg.keys().copied().collect();
        diags.push(
            Diagnostic::error(format!("cycle through {}", members.join(", "))).at(pm.name.clone()),
        );
    }

    diags
}
