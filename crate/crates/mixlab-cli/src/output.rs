//! Result tables and run manifests.
//!
//! Tables are flat: a header row plus homogeneous records, written either
//! as RFC-4180-style CSV (no quoting is ever needed for these fields) or
//! as a JSON array of flat objects. Output bytes depend only on the data,
//! so identical runs produce identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A flat result table.
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &'static str, columns: Vec<&'static str>) -> Self {
        Table {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    fn csv_cell(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }

    pub fn write(&self, dir: &Path, format: Format) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!(
            "{}.{}",
            self.name,
            match format {
                Format::Csv => "csv",
                Format::Json => "json",
            }
        ));
        let mut out = String::new();
        match format {
            Format::Csv => {
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Self::csv_cell).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut obj = Map::new();
                        for (col, val) in self.columns.iter().zip(row) {
                            obj.insert((*col).to_string(), val.clone());
                        }
                        Value::Object(obj)
                    })
                    .collect();
                out = serde_json::to_string_pretty(&records).expect("json");
                out.push('\n');
            }
        }
        let mut file = fs::File::create(&path)?;
        file.write_all(out.as_bytes())?;
        Ok(path)
    }
}

/// Write the run manifest next to the results.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    seed: u64,
    params: Value,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let started_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "params": params,
        "started_at": started_at,
    });
    let path = dir.join(format!("{command}_manifest.json"));
    let mut file = fs::File::create(&path)?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest json");
    text.push('\n');
    file.write_all(text.as_bytes())?;
    Ok(path)
}

/// Shorthand for numeric JSON cells.
pub fn num(v: f64) -> Value {
    json!(v)
}

pub fn int(v: u64) -> Value {
    json!(v)
}

pub fn text(v: impl Into<String>) -> Value {
    Value::String(v.into())
}
