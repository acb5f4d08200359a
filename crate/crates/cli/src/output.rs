//! Artifact rendering and atomic writes.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::config::Format;
use crate::Failure;

/// A flat table for CSV output.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Full-precision text for a float, stable across runs.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// JSON: the envelope, pretty-printed. CSV: `#`-prefixed metadata lines
/// carrying everything but the result, then the table.
pub fn render(envelope: &Value, table: &Table, format: Format) -> Result<Vec<u8>, Failure> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_vec_pretty(envelope).map_err(|e| Failure::Io(e.to_string()))?;
            s.push(b'\n');
            Ok(s)
        }
        Format::Csv => {
            let mut out = Vec::new();
            if let Value::Object(map) = envelope {
                for (k, v) in map.iter().filter(|(k, _)| k.as_str() != "result") {
                    writeln!(out, "# {k}={v}").map_err(|e| Failure::Io(e.to_string()))?;
                }
            }
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&table.header).map_err(|e| Failure::Io(e.to_string()))?;
            for r in &table.rows {
                w.write_record(r).map_err(|e| Failure::Io(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
