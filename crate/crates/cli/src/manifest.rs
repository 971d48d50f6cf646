//! Run manifests: enough to reproduce every emitted file from the resolved
//! config and seed alone.

use crate::config::ExperimentConfig;
use crate::run::RunOutput;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub mode: String,
    pub config_sha256: String,
    /// The config after command-line and environment overrides.
    pub config: ExperimentConfig,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub workers: usize,
    pub wall_time_seconds: f64,
    /// "ok", or "partial" when some replicates failed.
    pub status: String,
    pub failed_replicates: usize,
    pub attempted_replicates: usize,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the resolved config in its canonical JSON form.
pub fn config_hash(config: &ExperimentConfig) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, output: &RunOutput, workers: usize, wall_time_seconds: f64) -> Self {
        Self {
            tool: "auxtrial".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: auxtrial::VERSION.into(),
            command: command.into(),
            mode: config.mode.map_or("", |m| m.name()).into(),
            config_sha256: config_hash(config),
            config: config.clone(),
            seed: config.seed,
            replicates: config.replicates,
            workers,
            wall_time_seconds,
            status: if output.failed > 0 { "partial" } else { "ok" }.into(),
            failed_replicates: output.failed,
            attempted_replicates: output.attempted,
            files: output
                .files
                .iter()
                .map(|(name, c)| FileEntry {
                    name: name.clone(),
                    sha256: sha256_hex(c.as_bytes()),
                    bytes: c.len(),
                })
                .collect(),
        }
    }
}

/// Writes the outputs, a `PARTIAL` marker when replicates failed, and
/// `manifest.json` last.
pub fn write_outputs(dir: &Path, output: &RunOutput, manifest: &Manifest) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &output.files {
        std::fs::write(dir.join(name), contents)?;
    }
    let marker = dir.join("PARTIAL");
    if output.failed > 0 {
        std::fs::write(
            &marker,
            format!("{} of {} replicates failed and were excluded\n", output.failed, output.attempted),
        )?;
    } else if marker.exists() {
        std::fs::remove_file(marker)?;
    }
    let json = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), json + "\n")
}
