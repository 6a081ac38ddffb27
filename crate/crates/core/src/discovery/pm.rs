use std::path::{Path, PathBuf};

use super::{DiscoveryError, LoaderRegistry};
use crate::megamodel::{Megamodel, MegamodelError, NewResource, Relation, RelationKind, ResourceId, ResourceKind};
use crate::procmodel::{
    load_library, parse_pm_file, resolve_calls, CarrierRef, Endpoint, NodeKind, ProcessModel, ResolvedProcessModel,
};
use crate::util::relative_location;
use crate::weave::{implementation_resource, save_weave, weave, weave_path, WeaveModel};

/// What PM discovery registered and produced.
#[derive(Debug, Clone)]
pub struct PmDiscovery {
    pub pm: ResourceId,
    pub resolved: ResolvedProcessModel,
    pub weave: WeaveModel,
    pub weave_resource: ResourceId,
    pub weave_path: PathBuf,
    /// Resources created by this call.
    pub registered: Vec<ResourceId>,
}

/// Registers a process model, the models it calls, their implementations
/// and every intermediate model, then weaves it and stores the weave model
/// under `.maple/weave/`. `library` defaults to the model's own directory.
pub fn discover_pm(
    pm_path: &Path,
    mgm: &mut Megamodel,
    library: Option<&Path>,
    loaders: &LoaderRegistry,
) -> Result<PmDiscovery, DiscoveryError> {
    let root_pm = parse_pm_file(pm_path)?;
    let lib_dir = library.map(Path::to_path_buf).unwrap_or_else(|| {
        pm_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf()
    });
    let lib = load_library(&lib_dir)?;
    let resolved = resolve_calls(root_pm, &lib.models)?;
    let mut registered = Vec::new();
    let mut track = |r: Result<(ResourceId, bool), MegamodelError>| -> Result<ResourceId, DiscoveryError> {
        let (id, created) = r?;
        if created {
            registered.push(id.clone());
        }
        Ok(id)
    };

    let pm_mm = mgm.metamodel_named("pm").cloned().ok_or_else(|| MegamodelError::UnknownMetamodel("pm".into()))?;
    let register_pm = |mgm: &mut Megamodel, pm: &ProcessModel, path: &Path| {
        let loc = relative_location(mgm.workspace_root(), path);
        mgm.register_tracked(NewResource::new(ResourceKind::ProcessModel, pm.name.clone(), loc).conforming_to(pm_mm.clone()))
    };
    let pm_id = track(register_pm(mgm, &resolved.root, pm_path))?;
    for (name, callee) in &resolved.library {
        if let Some(path) = lib.paths.get(name) {
            track(register_pm(mgm, callee, path))?;
        }
    }

    let models: Vec<&ProcessModel> = std::iter::once(&resolved.root).chain(resolved.library.values()).collect();
    for pm in &models {
        for action in pm.nodes_of(NodeKind::Action) {
            let rel = action.implementation.clone().unwrap_or_default();
            let unresolved = |reason: &str| DiscoveryError::UnresolvedImplementation {
                action: format!("{}.{}", pm.name, action.name),
                path: rel.clone(),
                reason: reason.to_string(),
            };
            let abs = mgm.workspace_root().join(&rel);
            if !abs.is_file() {
                return Err(unresolved("file not found"));
            }
            let Some(loader) = loaders.classify(&abs) else { return Err(unresolved("no loader for this file type")) };
            if !matches!(loader.kind(), ResourceKind::ExecutableSpec | ResourceKind::Transformation) {
                return Err(unresolved("not a transformation or executable spec"));
            }
            let extracted = loader.extract(&abs)?;
            let mut res = NewResource::new(loader.kind(), extracted.name, relative_location(mgm.workspace_root(), &abs));
            res.meta = extracted.meta;
            if let Some(mm) = extracted.metamodel {
                let id = mgm.metamodel_named(&mm).cloned().ok_or(MegamodelError::UnknownMetamodel(mm))?;
                res = res.conforming_to(id);
            }
            track(mgm.register_tracked(res))?;
        }
    }

    for pm in &models {
        for (name, mm) in pm.intermediates() {
            let mm_id = mgm.metamodel_named(&mm).cloned().ok_or(MegamodelError::UnknownMetamodel(mm))?;
            track(mgm.register_tracked(NewResource::virtual_(ResourceKind::ModelInstance, name).conforming_to(mm_id)))?;
        }
        link_intermediates(pm, mgm)?;
    }

    let woven = weave(&resolved, &pm_id, mgm)?;
    let path = weave_path(mgm.workspace_root(), &resolved.root.name);
    save_weave(&woven, &path)?;
    let weave_mm =
        mgm.metamodel_named("weave").cloned().ok_or_else(|| MegamodelError::UnknownMetamodel("weave".into()))?;
    let loc = relative_location(mgm.workspace_root(), &path);
    let weave_id = track(mgm.register_tracked(
        NewResource::new(ResourceKind::WeaveModel, resolved.root.name.clone(), loc).conforming_to(weave_mm),
    ))?;
    mgm.add_relation(Relation::new(RelationKind::WeaveOf, weave_id.clone(), pm_id.clone()))?;

    Ok(PmDiscovery { pm: pm_id, resolved, weave: woven, weave_resource: weave_id, weave_path: path, registered })
}

/// `InputOf`/`OutputOf` relations between intermediates and the
/// implementations of the actions reading or writing them.
fn link_intermediates(pm: &ProcessModel, mgm: &mut Megamodel) -> Result<(), DiscoveryError> {
    for edge in pm.object_edges() {
        let local = match pm.carrier_of(edge) {
            Some(CarrierRef::ObjectNode(l)) | Some(CarrierRef::Direct(l)) => l,
            _ => continue,
        };
        let Some(model) = mgm.virtual_named(ResourceKind::ModelInstance, &format!("{}.{local}", pm.name)).cloned()
        else {
            continue;
        };
        for (reference, as_source, kind) in
            [(&edge.source, true, RelationKind::OutputOf), (&edge.target, false, RelationKind::InputOf)]
        {
            if let Ok(Endpoint::Pin { node, .. }) = pm.endpoint(reference, as_source) {
                if node.kind != NodeKind::Action {
                    continue;
                }
                let implementation = node.implementation.as_deref().unwrap_or_default();
                if let Some(t) = implementation_resource(mgm, implementation).cloned() {
                    mgm.add_relation(Relation::new(kind, model.clone(), t))?;
                }
            }
        }
    }
    Ok(())
}
