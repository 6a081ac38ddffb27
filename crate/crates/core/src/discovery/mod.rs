//! Workspace and process-model discovery.
//!
//! [`discover_workspace`] walks a directory tree in lexicographic order,
//! classifies each file through the [`LoaderRegistry`] and registers what it
//! finds. Model instances carry no type information of their own; their
//! metamodel comes from a `<file>.conforms` sidecar holding a metamodel
//! name, or from the `models` map of `.maple/manifest.json`.
//!
//! [`discover_pm`] registers a process model together with its
//! implementations and intermediate models, then weaves it.

mod loaders;
mod pm;
pub mod spec;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::diag::Diagnostic;
use crate::megamodel::store::{StoreError, STATE_DIR};
use crate::megamodel::{Megamodel, MegamodelError, NewResource, ResourceId, ResourceKind};
use crate::procmodel::{PmError, ResolveError};
use crate::util::relative_location;
use crate::weave::WeaveError;

pub use loaders::{
    classify, BuiltinLoader, ExecSpecLoader, Extracted, Loader, LoaderRegistry, MetamodelLoader, ProcessModelLoader,
    StoreLoader, META_COMMAND, META_HANDLER, META_OP, META_PARAMETERS,
};
pub use pm::{discover_pm, PmDiscovery};
use spec::SpecError;

/// Suffix of metamodel sidecar files.
pub const SIDECAR_EXTENSION: &str = ".conforms";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Spec { path: PathBuf, source: SpecError },
    #[error(transparent)]
    Pm(#[from] PmError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("action `{action}`: unresolved implementation `{path}`: {reason}")]
    UnresolvedImplementation { action: String, path: String, reason: String },
    #[error("extension `{extension}` of loader `{added}` overlaps loader `{existing}`")]
    OverlappingExtension { extension: String, existing: String, added: String },
    #[error(transparent)]
    Megamodel(#[from] MegamodelError),
    #[error(transparent)]
    Weave(#[from] WeaveError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{}: no loader for this file type and no `.conforms` sidecar", .0.display())]
    Unclassified(PathBuf),
}

impl DiscoveryError {
    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            DiscoveryError::Pm(e) => e.to_diagnostic(),
            DiscoveryError::Resolve(ResolveError::Invalid { diagnostics, .. }) => diagnostics
                .iter()
                .find(|d| d.is_error())
                .cloned()
                .unwrap_or_else(|| Diagnostic::error(self.to_string())),
            other => Diagnostic::error(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscoveryReport {
    /// Resources created by this run.
    pub registered: Vec<ResourceId>,
    /// Classifiable files that were already registered.
    pub unchanged: Vec<ResourceId>,
    pub skipped: Vec<(PathBuf, String)>,
    pub warnings: Vec<Diagnostic>,
}

/// How file contents are read during a workspace scan. Registration order
/// is the same either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Deserialize, Default)]
struct Manifest {
    #[serde(default)]
    models: BTreeMap<String, String>,
}

enum Candidate {
    Loaded { kind: ResourceKind, extracted: Extracted },
    Model { name: String, metamodel: String },
    Skip(String),
}

/// Discovers a workspace with the standard loaders.
pub fn discover_workspace(root: &Path, mgm: &mut Megamodel) -> DiscoveryReport {
    discover_workspace_with(root, mgm, &LoaderRegistry::standard(), ScanMode::default())
}

pub fn discover_workspace_with(
    root: &Path,
    mgm: &mut Megamodel,
    loaders: &LoaderRegistry,
    mode: ScanMode,
) -> DiscoveryReport {
    let mut report = DiscoveryReport::default();
    let mut files = Vec::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.')
    });
    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                if !e.file_name().to_string_lossy().ends_with(SIDECAR_EXTENSION) {
                    files.push(e.into_path());
                }
            }
            Ok(_) => {}
            Err(e) => {
                let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
                report.skipped.push((path, e.to_string()));
            }
        }
    }

    let manifest_path = root.join(STATE_DIR).join(MANIFEST_FILE);
    let manifest = match std::fs::read_to_string(&manifest_path) {
        Ok(text) => serde_json::from_str::<Manifest>(&text).unwrap_or_else(|e| {
            report.warnings.push(
                Diagnostic::warning(format!("ignoring malformed manifest: {e}"))
                    .at(manifest_path.display().to_string()),
            );
            Manifest::default()
        }),
        Err(_) => Manifest::default(),
    };

    let examine = |path: &PathBuf| -> Candidate {
        if let Some(loader) = loaders.classify(path) {
            return match loader.extract(path) {
                Ok(extracted) => Candidate::Loaded { kind: loader.kind(), extracted },
                Err(e) => Candidate::Skip(e.to_string()),
            };
        }
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut sidecar = path.clone().into_os_string();
        sidecar.push(SIDECAR_EXTENSION);
        if let Ok(text) = std::fs::read_to_string(PathBuf::from(sidecar)) {
            return Candidate::Model { name, metamodel: text.trim().to_string() };
        }
        match manifest.models.get(&relative_location(root, path)) {
            Some(mm) => Candidate::Model { name, metamodel: mm.clone() },
            None => Candidate::Skip("no loader for this file type".into()),
        }
    };
    let candidates = scan(&files, mode, examine);

    // Metamodel descriptors first so that models can reference them.
    let is_metamodel = |c: &Candidate| matches!(c, Candidate::Loaded { kind: ResourceKind::MetamodelDescriptor, .. });
    let ordered = files
        .iter()
        .zip(&candidates)
        .filter(|(_, c)| is_metamodel(c))
        .chain(files.iter().zip(&candidates).filter(|(_, c)| !is_metamodel(c)));

    for (path, candidate) in ordered {
        let location = relative_location(mgm.workspace_root(), path);
        let (kind, name, metamodel, meta) = match candidate {
            Candidate::Skip(reason) => {
                report.skipped.push((path.clone(), reason.clone()));
                continue;
            }
            Candidate::Loaded { kind, extracted } => {
                (*kind, extracted.name.clone(), extracted.metamodel.clone(), extracted.meta.clone())
            }
            Candidate::Model { name, metamodel } => {
                (ResourceKind::ModelInstance, name.clone(), Some(metamodel.clone()), BTreeMap::new())
            }
        };
        let mut resource = NewResource::new(kind, name.clone(), location);
        resource.meta = meta;
        if let Some(mm) = metamodel {
            match mgm.metamodel_named(&mm) {
                Some(id) => resource.metamodel = Some(id.clone()),
                None => {
                    report.skipped.push((path.clone(), format!("unknown metamodel `{mm}`")));
                    continue;
                }
            }
        }
        let duplicate = mgm.resources().any(|r| r.kind == kind && r.name == name);
        match mgm.register_tracked(resource) {
            Ok((id, true)) => {
                if duplicate {
                    report.warnings.push(
                        Diagnostic::warning(format!("duplicate {kind} name `{name}`"))
                            .at(relative_location(mgm.workspace_root(), path)),
                    );
                }
                report.registered.push(id);
            }
            Ok((id, false)) => report.unchanged.push(id),
            Err(e) => report.skipped.push((path.clone(), e.to_string())),
        }
    }
    report
}

/// Registers one file. Model instances need a `.conforms` sidecar.
/// Returns the id and whether it was newly created.
pub fn register_file(
    path: &Path,
    mgm: &mut Megamodel,
    loaders: &LoaderRegistry,
) -> Result<(ResourceId, bool), DiscoveryError> {
    if !path.is_file() {
        return Err(MegamodelError::MissingFile(path.to_path_buf()).into());
    }
    let location = relative_location(mgm.workspace_root(), path);
    let (kind, name, metamodel, meta) = match loaders.classify(path) {
        Some(loader) => {
            let e = loader.extract(path)?;
            (loader.kind(), e.name, e.metamodel, e.meta)
        }
        None => {
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(SIDECAR_EXTENSION);
            let text = std::fs::read_to_string(PathBuf::from(sidecar))
                .map_err(|_| DiscoveryError::Unclassified(path.to_path_buf()))?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            (ResourceKind::ModelInstance, name, Some(text.trim().to_string()), BTreeMap::new())
        }
    };
    let mut resource = NewResource::new(kind, name, location);
    resource.meta = meta;
    if let Some(mm) = metamodel {
        let id = mgm.metamodel_named(&mm).cloned().ok_or(MegamodelError::UnknownMetamodel(mm))?;
        resource.metamodel = Some(id);
    }
    Ok(mgm.register_tracked(resource)?)
}

#[cfg(feature = "parallel")]
fn scan<F>(files: &[PathBuf], mode: ScanMode, f: F) -> Vec<Candidate>
where
    F: Fn(&PathBuf) -> Candidate + Sync + Send,
{
    use rayon::prelude::*;
    match mode {
        ScanMode::Parallel => files.par_iter().map(f).collect(),
        ScanMode::Sequential => files.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn scan<F>(files: &[PathBuf], _mode: ScanMode, f: F) -> Vec<Candidate>
where
    F: Fn(&PathBuf) -> Candidate,
{
    files.iter().map(f).collect()
}
