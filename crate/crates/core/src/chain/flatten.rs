use std::collections::{BTreeMap, BTreeSet};

use super::{Carrier, CarrierSource, FlatGraph, FlatKind, FlatNode, PinFlow};
use crate::procmodel::{CarrierRef, Direction, Endpoint, NodeKind, ProcessModel, ResolvedProcessModel};

/// Inlines every call activity.
///
/// Node ids are bare at top level and `<call>.<inner>` below it. Carrier
/// ids are `<label>.<local>` where `label` is the top model's name at top
/// level and the call path otherwise; top-level parameters keep their bare
/// name. Callee parameters are aliased to the carriers attached to the
/// call-site pins, so data flows straight through the call boundary.
pub fn flatten(pm: &ResolvedProcessModel) -> FlatGraph {
    let mut b = Builder::default();
    let mut aliases = BTreeMap::new();
    for p in &pm.root.parameters {
        aliases.insert(p.name.clone(), p.name.clone());
        b.graph.carriers.insert(
            p.name.clone(),
            Carrier {
                id: p.name.clone(),
                metamodel: p.metamodel.clone(),
                source: CarrierSource::Parameter { name: p.name.clone(), direction: p.direction },
            },
        );
    }
    b.inline(&pm.root, &pm.library, "", &pm.root.name, &aliases);
    b.contract_junctions();
    b.graph.name = pm.root.name.clone();
    b.graph.flows.sort();
    b.graph
}

#[derive(Default)]
struct Builder {
    graph: FlatGraph,
    junctions: BTreeSet<String>,
}

impl Builder {
    /// Returns the (entry, exit) junctions of the inlined scope.
    fn inline(
        &mut self,
        pm: &ProcessModel,
        library: &BTreeMap<String, ProcessModel>,
        prefix: &str,
        label: &str,
        params: &BTreeMap<String, String>,
    ) -> (String, String) {
        let qualify = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        let entry = format!("{prefix}#entry");
        let exit = format!("{prefix}#exit");
        self.junctions.insert(entry.clone());
        self.junctions.insert(exit.clone());

        // Carrier of every pin attached to an object flow.
        let mut pin_carrier: BTreeMap<(&str, &str, Direction), String> = BTreeMap::new();
        for edge in pm.object_edges() {
            let Some(carrier) = pm.carrier_of(edge) else { continue };
            let id = match &carrier {
                CarrierRef::Parameter(p) => params.get(p).cloned().unwrap_or_else(|| p.clone()),
                CarrierRef::ObjectNode(local) | CarrierRef::Direct(local) => {
                    let id = format!("{label}.{local}");
                    let metamodel = pm
                        .endpoint(&edge.source, true)
                        .map(|e| e.metamodel().to_string())
                        .unwrap_or_default();
                    self.graph.carriers.entry(id.clone()).or_insert_with(|| Carrier {
                        id: id.clone(),
                        metamodel,
                        source: CarrierSource::Intermediate { resource: format!("{}.{local}", pm.name) },
                    });
                    id
                }
            };
            if let Ok(Endpoint::Pin { node, pin }) = pm.endpoint(&edge.source, true) {
                pin_carrier.insert((&node.name, &pin.name, Direction::Out), id.clone());
            }
            if let Ok(Endpoint::Pin { node, pin }) = pm.endpoint(&edge.target, false) {
                pin_carrier.insert((&node.name, &pin.name, Direction::In), id);
            }
        }

        let mut ends: BTreeMap<&str, (String, String)> = BTreeMap::new();
        for node in &pm.nodes {
            let id = qualify(&node.name);
            let span = match node.kind {
                NodeKind::Initial => (entry.clone(), entry.clone()),
                NodeKind::Final => (exit.clone(), exit.clone()),
                NodeKind::ObjectNode => continue,
                NodeKind::Action | NodeKind::Fork | NodeKind::Join => {
                    let kind = match node.kind {
                        NodeKind::Fork => FlatKind::Fork,
                        NodeKind::Join => FlatKind::Join,
                        _ => FlatKind::Action,
                    };
                    for pin in &node.pins {
                        if let Some(c) = pin_carrier.get(&(node.name.as_str(), pin.name.as_str(), pin.direction)) {
                            self.graph.flows.push(PinFlow {
                                node: id.clone(),
                                pin: pin.name.clone(),
                                direction: pin.direction,
                                carrier: c.clone(),
                            });
                        }
                    }
                    self.graph.nodes.insert(
                        id.clone(),
                        FlatNode {
                            id: id.clone(),
                            kind,
                            implementation: node.implementation.clone(),
                            pins: node.pins.clone(),
                            synthesized: false,
                        },
                    );
                    (id.clone(), id)
                }
                NodeKind::CallActivity => {
                    let Some(callee) = node.callee.as_deref().and_then(|c| library.get(c)) else { continue };
                    let aliases: BTreeMap<String, String> = node
                        .pins
                        .iter()
                        .filter_map(|p| {
                            let c = pin_carrier.get(&(node.name.as_str(), p.name.as_str(), p.direction))?;
                            Some((p.name.clone(), c.clone()))
                        })
                        .collect();
                    self.inline(callee, library, &id, &id, &aliases)
                }
            };
            ends.insert(&node.name, span);
        }

        for edge in pm.control_edges() {
            if let (Some(src), Some(dst)) = (ends.get(edge.source.as_str()), ends.get(edge.target.as_str())) {
                self.graph.control.insert((src.1.clone(), dst.0.clone()));
            }
        }
        (entry, exit)
    }

    /// Removes junction nodes, connecting each predecessor to each
    /// successor.
    fn contract_junctions(&mut self) {
        for j in std::mem::take(&mut self.junctions) {
            let preds: Vec<String> =
                self.graph.control.iter().filter(|(_, b)| *b == j).map(|(a, _)| a.clone()).collect();
            let succs: Vec<String> =
                self.graph.control.iter().filter(|(a, _)| *a == j).map(|(_, b)| b.clone()).collect();
            self.graph.control.retain(|(a, b)| *a != j && *b != j);
            for p in &preds {
                for s in &succs {
                    if p != s {
                        self.graph.control.insert((p.clone(), s.clone()));
                    }
                }
            }
        }
    }
}
