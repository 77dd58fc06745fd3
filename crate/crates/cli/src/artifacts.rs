//! Files on disk: CSV text, checksums and the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn csv_string<I>(header: &[&str], records: I) -> CliResult<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Csv(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in records {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Csv(e.to_string()))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Audit record of one invocation. Holds the full config, so it can be fed
/// back to `run` to reproduce the same files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub experiment_id: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    /// Relative path to SHA-256 of every artifact.
    pub artifacts: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> CliResult<String> {
    let canonical = serde_json::to_vec(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(sha256_hex(&canonical))
}

/// Writes `files` under `dir` and then the manifest covering them.
pub fn write_all(cfg: &ExperimentConfig, dir: &Path, files: &BTreeMap<String, Vec<u8>>) -> CliResult<Manifest> {
    let mut artifacts = BTreeMap::new();
    for (name, bytes) in files {
        write_file(&dir.join(name), bytes)?;
        artifacts.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        experiment_id: cfg.experiment_id.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(cfg)?,
        seeds: cfg.seeds.clone(),
        artifacts,
        config: cfg.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

/// A config file, or a manifest whose embedded config is checked against its hash.
pub fn load_config_or_manifest(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
        if v.get("config_sha256").is_some() {
            let m: Manifest = serde_json::from_value(v)
                .map_err(|e| CliError::Config(format!("{}: bad manifest: {e}", path.display())))?;
            m.config.validate()?;
            if config_hash(&m.config)? != m.config_sha256 {
                return Err(CliError::Config(format!("{}: config does not match its recorded hash", path.display())));
            }
            return Ok(m.config);
        }
    }
    ExperimentConfig::load(path)
}
