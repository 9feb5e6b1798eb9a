use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    /// Milliseconds per stage.
    pub timings: BTreeMap<String, u128>,
    /// Method-specific results, e.g. the chosen γ.
    pub results: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> CliResult<Self> {
        let bytes = serde_json::to_vec(config)?;
        let digest = Sha256::digest(&bytes);
        Ok(RunManifest {
            command: command.to_string(),
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            results: BTreeMap::new(),
        })
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.to_string(), start.elapsed().as_millis());
        out
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) -> CliResult<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> CliResult<()> {
        fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `manifest.json` into `dir`, after checking every listed output exists.
    pub fn finish(mut self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join("manifest.json");
        self.outputs.push(path.clone());
        if let Some(missing) = self.outputs.iter().find(|p| **p != path && !p.exists()) {
            return Err(CliError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("output {} was not written", missing.display()),
            )));
        }
        fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(path)
    }
}
