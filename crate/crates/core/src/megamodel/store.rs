//! JSON persistence for the megamodel.
//!
//! The store lives at `<workspace>/.maple/megamodel.json` and holds
//! `version`, `resources` and `relations`. Both arrays are sorted so that
//! saving an unchanged megamodel produces byte-identical output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Megamodel, Relation, Resource};
use crate::util::write_file;

pub const STORE_VERSION: u32 = 1;
pub const STATE_DIR: &str = ".maple";
pub const STORE_FILE: &str = "megamodel.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: malformed store: {message}")]
    MalformedStore { path: PathBuf, line: usize, column: usize, message: String },
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn json(path: &Path, err: serde_json::Error) -> Self {
        Self::MalformedStore {
            path: path.to_path_buf(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    pub(crate) fn invalid(path: &Path, message: impl Into<String>) -> Self {
        Self::MalformedStore { path: path.to_path_buf(), line: 0, column: 0, message: message.into() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u32,
    resources: Vec<Resource>,
    relations: Vec<Relation>,
}

/// Default store location for a workspace.
pub fn store_path(workspace: &Path) -> PathBuf {
    workspace.join(STATE_DIR).join(STORE_FILE)
}

/// Serializes to the canonical store text.
pub fn to_string(mgm: &Megamodel) -> String {
    let mut relations: Vec<Relation> = mgm.relations().cloned().collect();
    relations.sort_by(|a, b| {
        (&a.source, a.kind, &a.target).cmp(&(&b.source, b.kind, &b.target))
    });
    let doc = Document {
        version: STORE_VERSION,
        resources: mgm.resources().cloned().collect(),
        relations,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("megamodel serializes");
    text.push('\n');
    text
}

pub fn save(mgm: &Megamodel, path: &Path) -> Result<(), StoreError> {
    write_file(path, to_string(mgm).as_bytes()).map_err(|e| StoreError::io(path, e))
}

/// Loads a store. The workspace root is the directory containing `.maple/`
/// when the file sits there, otherwise the file's own directory.
pub fn load(path: &Path) -> Result<Megamodel, StoreError> {
    let parent = path.parent().unwrap_or(Path::new("."));
    let root = if parent.file_name().is_some_and(|n| n == STATE_DIR) {
        parent.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        parent.to_path_buf()
    };
    load_with_root(path, root)
}

pub fn load_with_root(path: &Path, root: impl Into<PathBuf>) -> Result<Megamodel, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    from_str(&text, path, root.into())
}

pub(crate) fn from_str(text: &str, path: &Path, root: PathBuf) -> Result<Megamodel, StoreError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| StoreError::json(path, e))?;
    if doc.version != STORE_VERSION {
        return Err(StoreError::invalid(path, format!("unsupported store version {}", doc.version)));
    }
    Megamodel::from_parts(root, doc.resources, doc.relations)
        .map_err(|msg| StoreError::invalid(path, msg))
}

/// Loads the workspace store, or returns the base megamodel when none exists.
pub fn load_or_base(workspace: &Path) -> Result<Megamodel, StoreError> {
    let path = store_path(workspace);
    if path.exists() {
        load_with_root(&path, workspace)
    } else {
        Ok(Megamodel::base(workspace))
    }
}
