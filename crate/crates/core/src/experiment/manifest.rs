use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Pending,
    Done,
    /// Finished but the fixed point missed its tolerance; the row is kept.
    NotConverged,
    Failed,
    /// Not attempted because an earlier point failed.
    Skipped,
}

impl PointStatus {
    pub fn is_terminal(self) -> bool {
        self != PointStatus::Pending
    }

    /// Whether the stored row can be reused on resume.
    pub fn has_result(self) -> bool {
        matches!(self, PointStatus::Done | PointStatus::NotConverged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub index: usize,
    pub value: f64,
    pub status: PointStatus,
    pub wall_clock_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub config_hash: String,
    pub code_version: String,
    pub parameter: String,
    pub points: Vec<PointEntry>,
    pub files: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(kind: &str, config_hash: String, parameter: &str, values: &[f64]) -> Self {
        Self {
            kind: kind.to_string(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            parameter: parameter.to_string(),
            points: values
                .iter()
                .enumerate()
                .map(|(index, &value)| PointEntry {
                    index,
                    value,
                    status: PointStatus::Pending,
                    wall_clock_s: 0.0,
                    row: None,
                    error: None,
                })
                .collect(),
            files: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_str(&std::fs::read_to_string(path)?)?))
    }

    /// Writes through a temporary file so a killed run never leaves a torn
    /// manifest behind.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(tmp, dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn count(&self, status: PointStatus) -> usize {
        self.points.iter().filter(|p| p.status == status).count()
    }

    pub fn is_complete(&self) -> bool {
        self.points.iter().all(|p| p.status.is_terminal())
    }

    pub fn failures(&self) -> usize {
        self.count(PointStatus::Failed) + self.count(PointStatus::Skipped)
    }
}
