//! Weave models bind process-model elements to megamodel resources.
//!
//! Neither side is modified: the binding lives in its own model. Element
//! names are qualified with `.` across call boundaries, the same way the
//! flattened graph names them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{flatten, CarrierSource, FlatGraph};
use crate::megamodel::store::{StoreError, STATE_DIR};
use crate::megamodel::{Megamodel, ResourceId, ResourceKind};
use crate::procmodel::{Direction, ResolvedProcessModel};
use crate::util::write_file;

pub const WEAVE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MappingKind {
    ActionMapping,
    ObjectNodeMapping,
    InOutMapping,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PinBinding {
    pub name: String,
    pub direction: Direction,
    /// The object-flow carrier the pin is attached to.
    pub carrier: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Mapping {
    pub kind: MappingKind,
    pub pm_element: String,
    pub mgm_resource: ResourceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin: Option<PinBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeaveModel {
    pub version: u32,
    pub pm: ResourceId,
    pub mappings: Vec<Mapping>,
}

impl WeaveModel {
    pub fn of_kind(&self, kind: MappingKind) -> impl Iterator<Item = &Mapping> {
        self.mappings.iter().filter(move |m| m.kind == kind)
    }

    /// Implementation bound to a (qualified) action.
    pub fn action(&self, element: &str) -> Option<&ResourceId> {
        self.of_kind(MappingKind::ActionMapping).find(|m| m.pm_element == element).map(|m| &m.mgm_resource)
    }

    /// Resource bound to a data carrier.
    pub fn object(&self, carrier: &str) -> Option<&ResourceId> {
        self.of_kind(MappingKind::ObjectNodeMapping).find(|m| m.pm_element == carrier).map(|m| &m.mgm_resource)
    }
}

#[derive(Debug, Error)]
pub enum WeaveError {
    #[error("action `{action}`: implementation `{path}` is not registered")]
    UnresolvedImplementation { action: String, path: String },
    #[error("object flow carrier `{0}` has no registered resource")]
    UnmappedObjectFlow(String),
}

/// Produces weave models for one process-model language.
pub trait Weaver {
    fn weave(&self, pm: &ResolvedProcessModel, pm_id: &ResourceId, mgm: &Megamodel) -> Result<WeaveModel, WeaveError>;
}

/// The weaver for the built-in process-model language.
#[derive(Debug, Clone, Copy, Default)]
pub struct PmWeaver;

impl Weaver for PmWeaver {
    fn weave(&self, pm: &ResolvedProcessModel, pm_id: &ResourceId, mgm: &Megamodel) -> Result<WeaveModel, WeaveError> {
        weave_flat(&flatten(pm), pm_id, mgm)
    }
}

pub fn weave(pm: &ResolvedProcessModel, pm_id: &ResourceId, mgm: &Megamodel) -> Result<WeaveModel, WeaveError> {
    PmWeaver.weave(pm, pm_id, mgm)
}

/// Resource registered for an implementation path (workspace-relative).
pub fn implementation_resource<'a>(mgm: &'a Megamodel, path: &str) -> Option<&'a ResourceId> {
    let p = mgm.workspace_root().join(path);
    [ResourceKind::ExecutableSpec, ResourceKind::Transformation]
        .into_iter()
        .find_map(|k| mgm.by_location(k, &p))
}

/// Resource a carrier maps to: the virtual intermediate for object nodes
/// and direct flows, the metamodel descriptor for parameters.
pub fn carrier_resource<'a>(mgm: &'a Megamodel, source: &CarrierSource, metamodel: &str) -> Option<&'a ResourceId> {
    match source {
        CarrierSource::Parameter { .. } => mgm.metamodel_named(metamodel),
        CarrierSource::Intermediate { resource } => mgm.virtual_named(ResourceKind::ModelInstance, resource),
    }
}

fn weave_flat(flat: &FlatGraph, pm_id: &ResourceId, mgm: &Megamodel) -> Result<WeaveModel, WeaveError> {
    let mut mappings = Vec::new();
    for action in flat.actions() {
        let path = action.implementation.clone().unwrap_or_default();
        let id = implementation_resource(mgm, &path).ok_or_else(|| WeaveError::UnresolvedImplementation {
            action: action.id.clone(),
            path: path.clone(),
        })?;
        mappings.push(Mapping {
            kind: MappingKind::ActionMapping,
            pm_element: action.id.clone(),
            mgm_resource: id.clone(),
            pin: None,
        });
    }
    for carrier in flat.carriers.values() {
        let Some(id) = carrier_resource(mgm, &carrier.source, &carrier.metamodel) else {
            return Err(WeaveError::UnmappedObjectFlow(carrier.id.clone()));
        };
        mappings.push(Mapping {
            kind: MappingKind::ObjectNodeMapping,
            pm_element: carrier.id.clone(),
            mgm_resource: id.clone(),
            pin: None,
        });
    }
    for flow in &flat.flows {
        let carrier = &flat.carriers[&flow.carrier];
        let id = carrier_resource(mgm, &carrier.source, &carrier.metamodel)
            .ok_or_else(|| WeaveError::UnmappedObjectFlow(carrier.id.clone()))?;
        mappings.push(Mapping {
            kind: MappingKind::InOutMapping,
            pm_element: flow.node.clone(),
            mgm_resource: id.clone(),
            pin: Some(PinBinding { name: flow.pin.clone(), direction: flow.direction, carrier: flow.carrier.clone() }),
        });
    }
    mappings.sort();
    Ok(WeaveModel { version: WEAVE_VERSION, pm: pm_id.clone(), mappings })
}

/// `<workspace>/.maple/weave/<pm>.weave.json`
pub fn weave_path(workspace: &Path, pm_name: &str) -> PathBuf {
    workspace.join(STATE_DIR).join("weave").join(format!("{pm_name}.weave.json"))
}

pub fn weave_to_string(w: &WeaveModel) -> String {
    let mut s = serde_json::to_string_pretty(w).expect("weave model serializes");
    s.push('\n');
    s
}

pub fn save_weave(w: &WeaveModel, path: &Path) -> Result<(), StoreError> {
    write_file(path, weave_to_string(w).as_bytes()).map_err(|e| StoreError::io(path, e))
}

pub fn load_weave(path: &Path) -> Result<WeaveModel, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    let w: WeaveModel = serde_json::from_str(&text).map_err(|e| StoreError::json(path, e))?;
    if w.version != WEAVE_VERSION {
        return Err(StoreError::invalid(path, format!("unsupported weave version {}", w.version)));
    }
    Ok(w)
}
