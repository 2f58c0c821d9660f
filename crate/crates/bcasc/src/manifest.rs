//! Run manifests: what was run, with which configuration, and hashes of
//! everything it wrote.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    /// Fully resolved configuration.
    pub config: Value,
    pub seeds: Vec<u64>,
    pub threads: usize,
    /// False when more than one thread was used.
    pub bit_exact: bool,
    pub outputs: Vec<OutputFile>,
    /// SHA-256 over `path \0 sha256 \n` of every output, in order.
    pub artifact_hash: String,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seeds: Vec<u64>, threads: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: std::env::args().collect(),
            config,
            seeds,
            threads,
            bit_exact: threads <= 1,
            outputs: Vec::new(),
            artifact_hash: sha256_hex(b""),
            wall_time_s: 0.0,
        }
    }

    /// Writes `bytes` to `dir/name` and records its hash.
    pub fn write_output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(OutputFile { path: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        self.artifact_hash = self.combined_hash();
        Ok(path)
    }

    fn combined_hash(&self) -> String {
        let mut h = Sha256::new();
        for o in &self.outputs {
            h.update(o.path.as_bytes());
            h.update([0]);
            h.update(o.sha256.as_bytes());
            h.update(b"\n");
        }
        format!("{:x}", h.finalize())
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.wall_time_s = elapsed.as_secs_f64();
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Re-hashes the recorded outputs under `dir`; returns the names that differ.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for o in &self.outputs {
            let path = dir.join(&o.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != o.sha256 {
                changed.push(o.path.clone());
            }
        }
        Ok(changed)
    }
}
