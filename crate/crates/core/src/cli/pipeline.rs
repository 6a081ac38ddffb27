//! Discovery, weaving and translation chained together, as run by the
//! `translate` and `enact` commands.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::chain::store::{chain_path, save_chain};
use crate::chain::{build_chain, flatten, synthesize_concurrency, validate_chain, Binding, ChainError, TransformationChain};
use crate::diag::Diagnostic;
use crate::discovery::{discover_pm, discover_workspace, DiscoveryError, DiscoveryReport, LoaderRegistry, PmDiscovery};
use crate::enactor::LaunchConfig;
use crate::megamodel::store::StoreError;
use crate::megamodel::{Megamodel, MegamodelError, NewResource, ResourceId, ResourceKind};
use crate::procmodel::Direction;
use crate::util::relative_location;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Megamodel(#[from] MegamodelError),
}

impl PipelineError {
    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            PipelineError::Discovery(e) => e.to_diagnostic(),
            other => Diagnostic::error(other.to_string()),
        }
    }

    /// Store failures are environmental; everything else stems from the
    /// user's models.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            PipelineError::Store(StoreError::Io { .. })
                | PipelineError::Discovery(DiscoveryError::Store(StoreError::Io { .. }))
        )
    }
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub discovery: PmDiscovery,
    pub chain: TransformationChain,
    pub chain_path: PathBuf,
    pub chain_resource: ResourceId,
}

/// Discovers and weaves a process model, translates it into a chain,
/// stores the chain under `.maple/chains/` and registers it. Callee models
/// are looked up next to `pm_path`.
pub fn translate(pm_path: &Path, mgm: &mut Megamodel) -> Result<Translation, PipelineError> {
    let discovery = discover_pm(pm_path, mgm, None, &LoaderRegistry::standard())?;
    let flat = synthesize_concurrency(flatten(&discovery.resolved));
    let chain = build_chain(&flat, &discovery.weave, mgm)?;
    let path = chain_path(mgm.workspace_root(), &chain.name);
    save_chain(&chain, &path)?;
    let chain_mm =
        mgm.metamodel_named("chain").cloned().ok_or_else(|| MegamodelError::UnknownMetamodel("chain".into()))?;
    let location = relative_location(mgm.workspace_root(), &path);
    let chain_resource =
        mgm.register(NewResource::new(ResourceKind::Chain, chain.name.clone(), location).conforming_to(chain_mm))?;
    Ok(Translation { discovery, chain, chain_path: path, chain_resource })
}

/// Chain diagnostics. Without a launch configuration, binding checks on
/// input parameters are skipped.
pub fn check_chain(chain: &TransformationChain, mgm: &Megamodel, launch: Option<&LaunchConfig>) -> Vec<Diagnostic> {
    match launch {
        Some(l) => validate_chain(chain, mgm, l),
        None => {
            let inputs: Vec<&str> = chain
                .data_nodes
                .iter()
                .filter(|d| matches!(d.binding, Binding::LaunchParameter { direction: Direction::In, .. }))
                .map(|d| d.id.as_str())
                .collect();
            validate_chain(chain, mgm, &LaunchConfig::new("check"))
                .into_iter()
                .filter(|d| !d.location.as_deref().is_some_and(|l| inputs.contains(&l)))
                .collect()
        }
    }
}

/// Everything `enact` runs before execution: workspace discovery,
/// translation and validation against the launch configuration.
pub fn prepare(
    pm_path: &Path,
    launch: &LaunchConfig,
    mgm: &mut Megamodel,
) -> Result<(DiscoveryReport, Translation, Vec<Diagnostic>), PipelineError> {
    let root = mgm.workspace_root().to_path_buf();
    let report = discover_workspace(&root, mgm);
    let translation = translate(pm_path, mgm)?;
    let diags = validate_chain(&translation.chain, mgm, launch);
    Ok((report, translation, diags))
}
