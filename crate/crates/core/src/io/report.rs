use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

/// SHA-256 (hex) of the resolved configuration's canonical JSON form.
pub fn config_hash(config: &RunConfig) -> String {
    let json = serde_json::to_string(&config.resolved()).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run report. Contains nothing time- or machine-dependent, so identical
/// inputs give identical bytes.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub library_version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, results: serde_json::Value) -> Self {
        Report {
            command: command.into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            config_sha256: config_hash(config),
            config: config.resolved(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            results,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical {
            message: "report is not serializable".into(),
            diagnostics: e.to_string(),
        })?;
        s.push('\n');
        Ok(s)
    }
}
