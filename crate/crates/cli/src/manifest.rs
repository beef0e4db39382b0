use std::path::Path;
use std::time::SystemTime;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub inputs: Vec<InputDigest>,
    pub started: String,
    pub finished: String,
}

pub struct Recorder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    started: SystemTime,
}

impl Recorder {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Recorder { command: command.to_owned(), config, seed, inputs: Vec::new(), started: SystemTime::now() }
    }

    /// Hashes the bytes of an input file.
    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(())
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            inputs: self.inputs,
            started: humantime::format_rfc3339_millis(self.started).to_string(),
            finished: humantime::format_rfc3339_millis(SystemTime::now()).to_string(),
        }
    }
}
