use std::collections::BTreeSet;

use super::{Binding, TransformationChain};
use crate::diag::Diagnostic;
use crate::enactor::LaunchConfig;
use crate::megamodel::{Megamodel, ResourceKind};
use crate::procmodel::Direction;
use crate::util::resolve_location;

/// Checks a chain against the megamodel and a launch configuration.
///
/// Errors: unbound or missing input parameters, inputs whose registered
/// metamodel differs from the data node's ("conformance mismatch"), data
/// edges joining different metamodels, unknown metamodels, cycles.
/// Warnings: unordered steps writing the same data node ("writer
/// conflict, will serialize").
pub fn validate_chain(chain: &TransformationChain, mgm: &Megamodel, launch: &LaunchConfig) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    for node in &chain.data_nodes {
        if mgm.metamodel_named(&node.metamodel).is_none() {
            diags.push(Diagnostic::error(format!("unknown metamodel `{}`", node.metamodel)).at(&node.id));
        }
        match &node.binding {
            Binding::LaunchParameter { name, direction: Direction::In } => {
                let Some(path) = launch.bindings.get(name) else {
                    diags.push(Diagnostic::error(format!("missing binding for input parameter `{name}`")).at(&node.id));
                    continue;
                };
                let abs = resolve_location(mgm.workspace_root(), path);
                if !abs.is_file() {
                    diags.push(
                        Diagnostic::error(format!("input `{name}` bound to missing file `{path}`")).at(&node.id),
                    );
                    continue;
                }
                match mgm.by_location(ResourceKind::ModelInstance, &abs).and_then(|id| mgm.metamodel_name_of(id)) {
                    None => diags.push(
                        Diagnostic::error(format!("input `{name}`: `{path}` is not a registered model")).at(&node.id),
                    ),
                    Some(mm) if mm != node.metamodel => diags.push(
                        Diagnostic::error(format!(
                            "conformance mismatch: `{path}` conforms to `{mm}`, parameter `{name}` expects `{}`",
                            node.metamodel
                        ))
                        .at(&node.id),
                    ),
                    Some(_) => {}
                }
            }
            Binding::Unbound => {
                diags.push(Diagnostic::error("data node is unbound".to_string()).at(&node.id));
            }
            _ => {}
        }
    }

    for edge in &chain.data_edges {
        let loc = format!("{}.{}", edge.step, edge.pin);
        let (Some(node), Some(step)) = (chain.data_node(&edge.data), chain.step(&edge.step)) else {
            diags.push(Diagnostic::error(format!("data edge references unknown `{}`", edge.data)).at(loc));
            continue;
        };
        match step.pin(&edge.pin, edge.direction) {
            Some(pin) if pin.metamodel == node.metamodel => {}
            Some(pin) => diags.push(
                Diagnostic::error(format!(
                    "metamodel mismatch: pin is `{}`, data node `{}` is `{}`",
                    pin.metamodel, node.id, node.metamodel
                ))
                .at(loc),
            ),
            None => diags.push(Diagnostic::error(format!("step has no {} pin `{}`", edge.direction, edge.pin)).at(loc)),
        }
    }

    if !chain.is_acyclic() {
        diags.push(Diagnostic::error("chain contains a cycle").at(&chain.name));
        return diags;
    }

    let order = chain.step_order();
    for node in &chain.data_nodes {
        let writers: Vec<&str> = chain.writers(&node.id).into_iter().collect();
        let mut conflicting = BTreeSet::new();
        for (i, a) in writers.iter().enumerate() {
            for b in &writers[i + 1..] {
                let ordered = order.contains(&(a.to_string(), b.to_string()))
                    || order.contains(&(b.to_string(), a.to_string()));
                if !ordered {
                    conflicting.insert(*a);
                    conflicting.insert(*b);
                }
            }
        }
        if !conflicting.is_empty() {
            let list: Vec<&str> = conflicting.into_iter().collect();
            diags.push(
                Diagnostic::warning(format!("writer conflict, will serialize: {}", list.join(", "))).at(&node.id),
            );
        }
    }
    diags
}
