use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::megamodel::store::{StoreError, STATE_DIR};
use crate::megamodel::ResourceId;
use crate::util::write_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    NotStarted,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub status: StepStatus,
    pub handler_kind: String,
    /// Milliseconds since the Unix epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_info: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArtifactRecord {
    pub data_node: String,
    pub path: String,
    pub resource: ResourceId,
    pub producer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failed { step: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnactmentReport {
    pub run_id: String,
    pub per_step: BTreeMap<String, StepRecord>,
    pub artifacts: Vec<ArtifactRecord>,
    /// Resources the run added to the megamodel.
    pub mgm_delta: Vec<ResourceId>,
    pub outcome: Outcome,
}

impl EnactmentReport {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn status(&self, step: &str) -> Option<StepStatus> {
        self.per_step.get(step).map(|r| r.status)
    }

    pub fn steps_with(&self, status: StepStatus) -> Vec<&str> {
        self.per_step.iter().filter(|(_, r)| r.status == status).map(|(id, _)| id.as_str()).collect()
    }
}

pub fn run_dir(workspace: &Path, run_id: &str) -> PathBuf {
    workspace.join(STATE_DIR).join("runs").join(run_id)
}

pub fn report_path(workspace: &Path, run_id: &str) -> PathBuf {
    run_dir(workspace, run_id).join("report.json")
}

pub fn save_report(report: &EnactmentReport, path: &Path) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes()).map_err(|e| StoreError::io(path, e))
}

pub fn load_report(path: &Path) -> Result<EnactmentReport, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| StoreError::json(path, e))
}
