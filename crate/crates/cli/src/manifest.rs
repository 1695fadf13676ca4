//! Run manifests: enough to repeat a run and to check its artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::{CliResult, Failure};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactVersions {
    pub fretsync: String,
    pub manifest: u32,
    pub tab_format: u32,
    pub score_report: u32,
    pub checkpoint: u32,
}

impl Default for ArtifactVersions {
    fn default() -> Self {
        ArtifactVersions {
            fretsync: env!("CARGO_PKG_VERSION").to_string(),
            manifest: MANIFEST_VERSION,
            tab_format: fretsync::tab::FORMAT_VERSION,
            score_report: fretsync::metrics::REPORT_VERSION,
            checkpoint: fretsync::nn::checkpoint::VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub config_hash: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub versions: ArtifactVersions,
}

/// SHA-256 of the compact JSON form of `config`. Object keys are sorted by
/// `serde_json`'s map, so equal configs hash equally.
pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: Value, seed: Option<u64>, inputs: &[PathBuf], outputs: &[PathBuf]) -> CliResult<Self> {
        Ok(RunManifest {
            command,
            config_hash: config_hash(&config),
            config,
            seed,
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<CliResult<_>>()?,
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<CliResult<_>>()?,
            versions: ArtifactVersions::default(),
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
