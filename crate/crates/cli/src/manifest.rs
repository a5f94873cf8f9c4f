use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Input path as configured → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory (or as configured) → sha256.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub tool: String,
    pub model_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            tool: env!("CARGO_PKG_VERSION").to_string(),
            model_format: autopersuade::sunmodel::MODEL_FORMAT_VERSION,
        }
    }
}

/// One manifest per output directory; each command adds or replaces its
/// own stage record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub versions: Versions,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn load_or_new(dir: &Path, config: &RunConfig) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let mut manifest = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<RunManifest>(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?,
            Err(_) => RunManifest {
                config: config.clone(),
                versions: Versions::default(),
                stages: BTreeMap::new(),
            },
        };
        manifest.config = config.clone();
        manifest.versions = Versions::default();
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    /// Every output hash across stages, keyed `stage/path`.
    pub fn output_hashes(&self) -> BTreeMap<String, String> {
        self.stages
            .iter()
            .flat_map(|(stage, rec)| {
                rec.outputs
                    .iter()
                    .map(move |(p, h)| (format!("{stage}/{p}"), h.clone()))
            })
            .collect()
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Inputs read and outputs written by one command.
#[derive(Debug, Default)]
pub struct StageLog {
    pub inputs: Vec<(String, std::path::PathBuf)>,
    pub outputs: Vec<(String, std::path::PathBuf)>,
    pub details: BTreeMap<String, serde_json::Value>,
}

impl StageLog {
    pub fn input(&mut self, label: impl Into<String>, path: &Path) {
        self.inputs.push((label.into(), path.to_path_buf()));
    }

    pub fn output(&mut self, label: impl Into<String>, path: &Path) {
        self.outputs.push((label.into(), path.to_path_buf()));
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).expect("detail serializes"));
    }

    pub fn record(self, started: u64, error: Option<String>) -> CliResult<StageRecord> {
        let mut inputs = BTreeMap::new();
        for (label, path) in &self.inputs {
            if path.exists() {
                inputs.insert(label.clone(), sha256_file(path)?);
            }
        }
        let mut outputs = BTreeMap::new();
        if error.is_none() {
            for (label, path) in &self.outputs {
                outputs.insert(label.clone(), sha256_file(path)?);
            }
        }
        Ok(StageRecord {
            status: if error.is_none() { StageStatus::Ok } else { StageStatus::Failed },
            started_unix: started,
            finished_unix: unix_now(),
            inputs,
            outputs,
            details: self.details,
            error,
        })
    }
}
