//! Rendering of tables and reports, and where they are written.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Map, Value};
use spinelab::{Error, Result};

/// Version of every machine-readable record the CLI writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Evaluation(format!("writing CSV: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(cell)).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Evaluation(format!("writing CSV: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Evaluation(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} |", self.columns.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(self.columns.len()));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| cell(v).replace('|', "\\|")).collect();
            let _ = writeln!(s, "| {} |", cells.join(" | "));
        }
        s
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> = self
                        .columns
                        .iter()
                        .cloned()
                        .zip(r.iter().cloned())
                        .collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

/// `{schema, version, config, result}` wrapper of JSON output.
pub fn envelope<C: Serialize>(schema: &str, config: &C, result: Value) -> Value {
    json!({
        "schema": format!("spinelab.{schema}"),
        "version": SCHEMA_VERSION,
        "config": serde_json::to_value(config).unwrap_or(Value::Null),
        "result": result,
    })
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes to `<out_dir>/<name>` when an output directory is set, otherwise
/// to standard output.
pub struct Sink {
    pub out_dir: Option<PathBuf>,
}

impl Sink {
    pub fn emit(&self, name: &str, content: &str) -> Result<()> {
        match &self.out_dir {
            Some(dir) => {
                let io = |e: std::io::Error| {
                    Error::Config(format!("writing into {}: {e}", dir.display()))
                };
                fs::create_dir_all(dir).map_err(io)?;
                let path = dir.join(name);
                fs::write(&path, content).map_err(io)?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut out = std::io::stdout().lock();
                // A closed pipe is not an error worth reporting.
                let _ = out.write_all(content.as_bytes());
                let _ = out.flush();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![json!(1.5), json!("x|y")]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1.5,x|y\n");
        assert_eq!(t.to_markdown(), "| a | b |\n|---|---|\n| 1.5 | x\\|y |\n");
        assert_eq!(t.to_json(), json!([{ "a": 1.5, "b": "x|y" }]));
    }
}
