use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Diagnostic;

pub const DEFAULT_MAX_PARALLEL: usize = 4;

const KNOWN_KEYS: [&str; 4] = ["runId", "bindings", "env", "maxParallel"];

/// A launch configuration: which files bind the process model's
/// parameters and how the run is executed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LaunchConfig {
    pub run_id: String,
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
}

fn default_max_parallel() -> usize {
    DEFAULT_MAX_PARALLEL
}

impl LaunchConfig {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self { run_id: run_id.into(), bindings: BTreeMap::new(), env: BTreeMap::new(), max_parallel: DEFAULT_MAX_PARALLEL }
    }

    pub fn bind(mut self, parameter: impl Into<String>, path: impl Into<String>) -> Self {
        self.bindings.insert(parameter.into(), path.into());
        self
    }

    pub fn with_max_parallel(mut self, n: usize) -> Self {
        self.max_parallel = n;
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LaunchError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
}

fn syntax(message: impl Into<String>) -> LaunchError {
    LaunchError::Syntax { line: 0, column: 0, message: message.into() }
}

/// Parses a launch configuration. Unknown top-level keys are accepted with
/// a warning.
pub fn parse_launch_config(text: &str) -> Result<(LaunchConfig, Vec<Diagnostic>), LaunchError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LaunchError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Some(object) = value.as_object() else { return Err(syntax("launch configuration must be an object")) };
    let warnings = object
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .map(|k| Diagnostic::warning(format!("unknown launch configuration key `{k}` ignored")))
        .collect();
    let config: LaunchConfig = serde_json::from_value(value).map_err(|e| syntax(e.to_string()))?;
    if config.max_parallel < 1 {
        return Err(syntax("maxParallel must be ≥1"));
    }
    let id = &config.run_id;
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
        return Err(syntax(format!("runId `{id}` is not a valid directory name")));
    }
    Ok((config, warnings))
}
