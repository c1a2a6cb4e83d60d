//! Output files: every payload is wrapped with the tool version, the config
//! hash, the seed and the gate results.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GateResult {
    /// Passes when `value ≤ tolerance` (NaN fails).
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        GateResult {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    /// Passes when `value > tolerance`.
    pub fn above(name: &str, value: f64, tolerance: f64) -> Self {
        GateResult {
            name: name.into(),
            value,
            tolerance,
            passed: value > tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
    pub gates: Vec<GateResult>,
    pub data: T,
}

impl<T> Envelope<T> {
    pub fn new(command: &str, config: &RunConfig, gates: Vec<GateResult>, data: T) -> Self {
        Envelope {
            tool: "latinv".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            seed: config.seed(),
            config: config.clone(),
            gates,
            data,
        }
    }

    pub fn failed_gates(&self) -> Vec<String> {
        self.gates.iter().filter(|g| !g.passed).map(|g| g.name.clone()).collect()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Reads either an envelope or a bare payload.
pub fn read_payload<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let value: serde_json::Value = read_json(path)?;
    let inner = match value.get("data") {
        Some(d) if value.get("tool").is_some() => d.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
