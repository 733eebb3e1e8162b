use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: &'static str,
    pub library_version: &'static str,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub seed_from_entropy: bool,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

/// Collects manifest fields while a subcommand runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(
        subcommand: &str,
        parameters: serde_json::Value,
        seed: u64,
        seed_from_entropy: bool,
        threads: usize,
    ) -> Self {
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            manifest: RunManifest {
                schema_version: SCHEMA_VERSION,
                library_version: env!("CARGO_PKG_VERSION"),
                subcommand: subcommand.to_owned(),
                parameters,
                inputs: Vec::new(),
                seed,
                seed_from_entropy,
                threads,
                started_unix_seconds: started,
                wall_clock_seconds: 0.0,
                outputs: Vec::new(),
            },
            start: Instant::now(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> structdiv::Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| structdiv::Error::Io(format!("{}: {e}", path.display())))?;
        self.manifest.inputs.push(InputDigest { path: path.to_owned(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(bytes)
    }

    pub fn set_param(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.manifest.parameters {
            map.insert(key.to_owned(), value);
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_owned());
    }

    pub fn finish(mut self) -> RunManifest {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        self.manifest
    }
}
