//! JSON persistence for chains at `<workspace>/.maple/chains/<pm>.chain.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TransformationChain;
use crate::megamodel::store::{StoreError, STATE_DIR};
use crate::util::write_file;

pub const CHAIN_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u32,
    chain: TransformationChain,
}

pub fn chain_path(workspace: &Path, pm_name: &str) -> PathBuf {
    workspace.join(STATE_DIR).join("chains").join(format!("{pm_name}.chain.json"))
}

pub fn to_string(chain: &TransformationChain) -> String {
    let doc = Document { version: CHAIN_VERSION, chain: chain.clone() };
    let mut s = serde_json::to_string_pretty(&doc).expect("chain serializes");
    s.push('\n');
    s
}

pub fn save_chain(chain: &TransformationChain, path: &Path) -> Result<(), StoreError> {
    write_file(path, to_string(chain).as_bytes()).map_err(|e| StoreError::io(path, e))
}

pub fn load_chain(path: &Path) -> Result<TransformationChain, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    let doc: Document = serde_json::from_str(&text).map_err(|e| StoreError::json(path, e))?;
    if doc.version != CHAIN_VERSION {
        return Err(StoreError::invalid(path, format!("unsupported chain version {}", doc.version)));
    }
    Ok(doc.chain)
}
