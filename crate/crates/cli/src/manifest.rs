//! Per-run manifest: what ran, with which configuration, and what it wrote.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::FileConfig;
use crate::error::{io_context, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub config_hash: String,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub seed: u64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub converged: bool,
    pub config: FileConfig,
}

/// Hash of the configuration after flag overrides. serde_json writes
/// floats in shortest round-trip form, so the text and therefore the hash
/// do not depend on the platform.
pub fn config_hash(cfg: &FileConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn code_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        io_context(std::fs::write(&path, text), || format!("writing {}", path.display()))
    }
}
