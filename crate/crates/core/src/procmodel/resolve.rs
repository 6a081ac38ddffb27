use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{parse_pm_file, validate_pm, NodeKind, PmError, ProcessModel, PM_EXTENSION};
use crate::diag::{has_errors, Diagnostic};

/// A process model whose call activities are all bound to callees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedProcessModel {
    pub root: ProcessModel,
    /// Every process model reachable through calls, by name.
    pub library: BTreeMap<String, ProcessModel>,
}

impl ResolvedProcessModel {
    /// A model without call activities.
    pub fn standalone(pm: ProcessModel) -> Self {
        Self { root: pm, library: BTreeMap::new() }
    }

    pub fn callee(&self, name: &str) -> Option<&ProcessModel> {
        self.library.get(name)
    }

    /// Deepest nesting of call activities (0 for a flat model).
    pub fn call_depth(&self) -> usize {
        fn depth(pm: &ProcessModel, lib: &BTreeMap<String, ProcessModel>) -> usize {
            pm.nodes_of(NodeKind::CallActivity)
                .filter_map(|n| lib.get(n.callee.as_deref()?))
                .map(|c| 1 + depth(c, lib))
                .max()
                .unwrap_or(0)
        }
        depth(&self.root, &self.library)
    }
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("process model `{pm}` is not well-formed: {}", first(.diagnostics))]
    Invalid { pm: String, diagnostics: Vec<Diagnostic> },
    #[error("`{caller}` calls unknown activity `{callee}`")]
    UnknownCallee { caller: String, callee: String },
    #[error("recursive call: {}", .0.join(" -> "))]
    RecursiveCall(Vec<String>),
    #[error("call `{call}`: {detail}")]
    ParameterMismatch { call: String, detail: String },
}

fn first(diags: &[Diagnostic]) -> String {
    diags.iter().find(|d| d.is_error()).map(|d| d.to_string()).unwrap_or_default()
}

/// Process models available to call activities.
#[derive(Debug, Clone, Default)]
pub struct Library {
    pub models: BTreeMap<String, ProcessModel>,
    pub paths: BTreeMap<String, PathBuf>,
}

/// Parses every `*.pm.json` file directly inside `dir`, keyed by model
/// name. When two files declare the same name the lexicographically first
/// wins.
pub fn load_library(dir: &Path) -> Result<Library, PmError> {
    let mut out = Library::default();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.to_string_lossy().ends_with(PM_EXTENSION))
        .collect();
    entries.sort();
    for path in entries {
        let pm = parse_pm_file(&path)?;
        if !out.models.contains_key(&pm.name) {
            out.paths.insert(pm.name.clone(), path);
            out.models.insert(pm.name.clone(), pm);
        }
    }
    Ok(out)
}

/// Binds every call activity to its callee, checking that the call graph
/// is acyclic and that call-site pins match the callee's parameters.
pub fn resolve_calls(
    pm: ProcessModel,
    library: &BTreeMap<String, ProcessModel>,
) -> Result<ResolvedProcessModel, ResolveError> {
    let mut resolved = BTreeMap::new();
    let mut stack = vec![pm.name.clone()];
    visit(&pm, library, &mut stack, &mut resolved)?;
    Ok(ResolvedProcessModel { root: pm, library: resolved })
}

fn visit(
    pm: &ProcessModel,
    library: &BTreeMap<String, ProcessModel>,
    stack: &mut Vec<String>,
    resolved: &mut BTreeMap<String, ProcessModel>,
) -> Result<(), ResolveError> {
    let diagnostics = validate_pm(pm);
    if has_errors(&diagnostics) {
        return Err(ResolveError::Invalid { pm: pm.name.clone(), diagnostics });
    }
    for call in pm.nodes_of(NodeKind::CallActivity) {
        let callee_name = call.callee.clone().unwrap_or_default();
        if stack.contains(&callee_name) {
            let mut cycle = stack.clone();
            cycle.push(callee_name);
            return Err(ResolveError::RecursiveCall(cycle));
        }
        let callee = library.get(&callee_name).ok_or_else(|| ResolveError::UnknownCallee {
            caller: pm.name.clone(),
            callee: callee_name.clone(),
        })?;
        check_signature(&call.name, &call.pins, &callee.parameters)?;
        if !resolved.contains_key(&callee_name) {
            stack.push(callee_name.clone());
            visit(callee, library, stack, resolved)?;
            stack.pop();
            resolved.insert(callee_name, callee.clone());
        }
    }
    Ok(())
}

fn check_signature(
    call: &str,
    pins: &[super::Pin],
    params: &[super::Pin],
) -> Result<(), ResolveError> {
    let mismatch = |detail: String| ResolveError::ParameterMismatch { call: call.to_string(), detail };
    let key = |p: &super::Pin| (p.name.clone(), p.direction);
    let site: BTreeMap<_, _> = pins.iter().map(|p| (key(p), &p.metamodel)).collect();
    let callee: BTreeMap<_, _> = params.iter().map(|p| (key(p), &p.metamodel)).collect();
    let names: BTreeSet<_> = site.keys().chain(callee.keys()).collect();
    for k in names {
        match (site.get(k), callee.get(k)) {
            (Some(a), Some(b)) if a == b => {}
            (Some(a), Some(b)) => {
                return Err(mismatch(format!("{} pin `{}` is `{a}` but parameter is `{b}`", k.1, k.0)))
            }
            (Some(_), None) => return Err(mismatch(format!("no {} parameter `{}` on callee", k.1, k.0))),
            (None, _) => return Err(mismatch(format!("{} parameter `{}` has no call-site pin", k.1, k.0))),
        }
    }
    Ok(())
}
