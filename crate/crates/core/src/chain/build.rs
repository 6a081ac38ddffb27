use std::collections::BTreeSet;

use thiserror::Error;

use super::{
    Binding, CarrierSource, ControlEdge, DataEdge, DataNode, FlatGraph, FlatKind, Gateway, GatewayKind, Step, StepPin,
    TransformationChain,
};
use crate::discovery::spec::SpecParameter;
use crate::discovery::{META_HANDLER, META_PARAMETERS};
use crate::megamodel::{Megamodel, ResourceKind};
use crate::procmodel::Direction;
use crate::weave::WeaveModel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("step `{0}` has no bound implementation")]
    UnresolvedImplementation(String),
    #[error("step `{step}`: signature mismatch: {detail}")]
    SignatureMismatch { step: String, detail: String },
    #[error("data node `{0}` has no bound resource")]
    UnmappedCarrier(String),
}

/// Handler kind recorded by the implementation's loader, falling back to
/// the resource kind.
pub(crate) fn handler_kind(kind: ResourceKind, meta: &std::collections::BTreeMap<String, String>) -> String {
    meta.get(META_HANDLER).cloned().unwrap_or_else(|| match kind {
        ResourceKind::ExecutableSpec => "exec".into(),
        _ => "builtin".into(),
    })
}

/// Translates a flattened graph into a typed chain.
pub fn build_chain(flat: &FlatGraph, weave: &WeaveModel, mgm: &Megamodel) -> Result<TransformationChain, ChainError> {
    let mut steps = Vec::new();
    for action in flat.actions() {
        let unresolved = || ChainError::UnresolvedImplementation(action.id.clone());
        let impl_id = weave.action(&action.id).ok_or_else(unresolved)?;
        let res = mgm.get(impl_id).ok_or_else(unresolved)?;
        let params: Vec<SpecParameter> = res
            .meta
            .get(META_PARAMETERS)
            .map(|text| serde_json::from_str(text))
            .transpose()
            .map_err(|e| ChainError::SignatureMismatch { step: action.id.clone(), detail: e.to_string() })?
            .unwrap_or_default();
        let declared: BTreeSet<(&str, Direction, &str)> =
            params.iter().map(|p| (p.model_ref.as_str(), p.direction, p.metamodel.as_str())).collect();
        let pins: BTreeSet<(&str, Direction, &str)> =
            action.pins.iter().map(|p| (p.name.as_str(), p.direction, p.metamodel.as_str())).collect();
        if declared != pins {
            let fmt = |s: &BTreeSet<(&str, Direction, &str)>| {
                s.iter().map(|(n, d, m)| format!("{d} {n}:{m}")).collect::<Vec<_>>().join(", ")
            };
            return Err(ChainError::SignatureMismatch {
                step: action.id.clone(),
                detail: format!("pins [{}] but implementation declares [{}]", fmt(&pins), fmt(&declared)),
            });
        }
        let pins_of = |dir| {
            action
                .pins
                .iter()
                .filter(|p| p.direction == dir)
                .map(|p| StepPin { name: p.name.clone(), metamodel: p.metamodel.clone() })
                .collect()
        };
        steps.push(Step {
            id: action.id.clone(),
            implementation: impl_id.clone(),
            handler_kind: handler_kind(res.kind, &res.meta),
            in_pins: pins_of(Direction::In),
            out_pins: pins_of(Direction::Out),
        });
    }

    let mut data_nodes = Vec::new();
    for c in flat.carriers.values() {
        let binding = match &c.source {
            CarrierSource::Parameter { name, direction } => {
                Binding::LaunchParameter { name: name.clone(), direction: *direction }
            }
            CarrierSource::Intermediate { .. } => Binding::Intermediate {
                resource: weave.object(&c.id).cloned().ok_or_else(|| ChainError::UnmappedCarrier(c.id.clone()))?,
            },
        };
        data_nodes.push(DataNode { id: c.id.clone(), metamodel: c.metamodel.clone(), binding });
    }

    let gateways = flat
        .gateways()
        .map(|g| Gateway {
            id: g.id.clone(),
            kind: if g.kind == FlatKind::Fork { GatewayKind::Fork } else { GatewayKind::Join },
            synthesized: g.synthesized,
        })
        .collect();
    let control_edges =
        flat.control.iter().map(|(a, b)| ControlEdge { source: a.clone(), target: b.clone() }).collect();
    let mut data_edges: Vec<DataEdge> = flat
        .flows
        .iter()
        .map(|f| DataEdge { data: f.carrier.clone(), step: f.node.clone(), pin: f.pin.clone(), direction: f.direction })
        .collect();
    data_edges.sort();

    Ok(TransformationChain { name: flat.name.clone(), steps, data_nodes, gateways, control_edges, data_edges })
}
