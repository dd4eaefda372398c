//! Run manifests: what ran, with which knobs, over which exact inputs.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::artifacts::{create_output, file_digest};
use crate::error::{CliError, CliResult};

/// Reproducibility record for a directory-producing command. Written before
/// any other output, then rewritten once with the final status.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub command: String,
    pub created_at: DateTime<Utc>,
    /// Full knob snapshot for the command, flags and environment resolved.
    pub config: serde_json::Value,
    /// Input path -> SHA-256 of its bytes at start time.
    pub inputs: BTreeMap<String, String>,
    pub status: ManifestStatus,
    pub failed_stage: Option<String>,
    pub completed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestStatus {
    Started,
    Completed,
    Failed,
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, inputs: &[&Path]) -> CliResult<Self> {
        let mut digests = BTreeMap::new();
        for path in inputs {
            digests.insert(path.display().to_string(), file_digest(path)?);
        }
        Ok(Self {
            run_id: uuid::Uuid::new_v4().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created_at: Utc::now(),
            config,
            inputs: digests,
            status: ManifestStatus::Started,
            failed_stage: None,
            completed_at: None,
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        use std::io::Write;
        let path = dir.join("manifest.json");
        let mut out = create_output(&path)?;
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n")
            .and_then(|()| out.flush())
            .map_err(|e| crate::error::io_input(&path, e))
    }

    pub fn complete(&mut self, dir: &Path) -> CliResult<()> {
        self.status = ManifestStatus::Completed;
        self.completed_at = Some(Utc::now());
        self.write(dir)
    }

    pub fn fail(&mut self, dir: &Path, stage: &str) {
        self.status = ManifestStatus::Failed;
        self.failed_stage = Some(stage.to_string());
        self.completed_at = Some(Utc::now());
        // Best effort: the failure that brought the run down wins over any
        // error writing the post-mortem.
        if let Err(e) = self.write(dir) {
            log::warn!("could not write failure manifest: {e}");
        }
    }

    /// Adds a knob discovered mid-run (such as the trained head id).
    pub fn amend(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.config {
            map.insert(key.to_string(), value);
        }
    }
}
