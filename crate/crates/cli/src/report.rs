//! Report emission: one JSON document plus CSV tables per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A CSV table with preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Result of one experiment, before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub tables: Vec<Table>,
    /// Names of failed checks; nonempty means exit code 1.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn ok(result: impl Serialize, tables: Vec<Table>) -> Self {
        Outcome {
            result: serde_json::to_value(result).expect("report values serialize"),
            tables,
            failures: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct Document<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    result: &'a Value,
    failures: &'a [String],
    tables: Vec<String>,
}

/// Writes `<out>/<stem>.json` and each table; returns the written paths.
pub fn emit(config: &RunConfig, stem: &str, outcome: &Outcome) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(&config.out)?;
    let mut paths = Vec::new();
    for t in &outcome.tables {
        paths.push(t.write(&config.out)?);
    }
    let doc = Document {
        tool: "torobs",
        version: VERSION,
        config,
        result: &outcome.result,
        failures: &outcome.failures,
        tables: outcome
            .tables
            .iter()
            .map(|t| format!("{}.csv", t.name))
            .collect(),
    };
    let json = config.out.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&json, text)?;
    paths.insert(0, json);
    Ok(paths)
}
