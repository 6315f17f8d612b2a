//! One `manifest.json` per output directory.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{CliError, Result};
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_digest: String,
    /// SHA-256 of each input file, by path.
    pub inputs: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    /// Command-specific diagnostics.
    pub diagnostics: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: String, seeds: Vec<u64>, threads: usize) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest,
            inputs: BTreeMap::new(),
            seeds,
            threads,
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            warnings: Vec::new(),
            diagnostics: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn finish(mut self, dir: &Path, started: Instant) -> Result<()> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        write_json(&dir.join(MANIFEST_FILE), &self)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}
