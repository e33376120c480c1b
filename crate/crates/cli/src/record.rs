//! JSON run records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One command invocation and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub command: Vec<String>,
    pub seed: u64,
    pub version: String,
    pub result: serde_json::Value,
}

impl RunRecord {
    pub fn new<T: Serialize>(command: &[String], seed: u64, result: &T) -> CliResult<Self> {
        Ok(Self {
            timestamp: chrono::Utc::now().to_rfc3339(),
            command: command.to_vec(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            result: serde_json::to_value(result)
                .map_err(|e| CliError::Internal(format!("cannot serialize result: {e}")))?,
        })
    }
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("cannot serialize: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}
