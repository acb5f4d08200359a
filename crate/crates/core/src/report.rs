//! Versioned JSON envelope shared by every emitted artifact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1.0.0";

pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

/// Wall-clock information. Everything else in an artifact is a pure
/// function of the configuration and seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_s: f64,
    pub started_unix_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact<T> {
    pub schema_version: &'static str,
    pub kind: String,
    pub params: Value,
    pub seeds: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    pub result: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(kind: &str, params: Value, seeds: BTreeMap<String, u64>, result: T) -> Self {
        Artifact { schema_version: SCHEMA_VERSION, kind: kind.to_string(), params, seeds, timing: None, result }
    }

    pub fn with_timing(mut self, t: Option<Timing>) -> Self {
        self.timing = t;
        self
    }
}

/// Reads a previously emitted artifact. A missing or different schema
/// version produces a warning, not an error.
pub fn ingest(text: &str) -> Result<(Value, Vec<String>), serde_json::Error> {
    let v: Value = serde_json::from_str(text)?;
    let warnings = schema_warning(v.get("schema_version").and_then(Value::as_str))
        .into_iter()
        .collect();
    Ok((v, warnings))
}

/// Warning text for a schema version read from any input, if it differs.
pub fn schema_warning(found: Option<&str>) -> Option<String> {
    match found {
        Some(SCHEMA_VERSION) => None,
        Some(other) => Some(format!("schema version {other} differs from {SCHEMA_VERSION}")),
        None => Some(format!("no schema version found, expected {SCHEMA_VERSION}")),
    }
}
