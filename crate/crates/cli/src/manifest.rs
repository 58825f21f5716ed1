use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::fsutil::write_atomic;

/// Provenance record written next to every command's outputs. Identical
/// `config_hash` and `seed` reproduce byte-identical outcome logs; only
/// the wall-clock fields vary between reruns.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64, started_at: String) -> Self {
        Self {
            config_hash,
            seed,
            command: command_line(),
            started_at,
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Stamp the finish time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        self.finished_at = now_rfc3339();
        self.outputs.push(path.display().to_string());
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}
