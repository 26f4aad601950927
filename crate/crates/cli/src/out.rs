//! Output plumbing: a run directory, deterministic table writers, and the
//! manifest that inventories every file the run produced.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tfim_core::{Error, Result};

/// Observable-table encoding chosen on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config(format!(
                "format {other} is not csv or json"
            ))),
        }
    }
}

/// One table cell. Numbers keep their native JSON type; everything is
/// rendered through the shortest round-trip float form, so repeated runs
/// with the same inputs are byte-identical.
#[derive(Debug, Clone)]
pub enum Cell {
    U(u64),
    F(f64),
    S(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::U(v) => write!(f, "{v}"),
            Cell::F(v) => write!(f, "{v}"),
            Cell::S(v) => write!(f, "{v}"),
            Cell::Empty => Ok(()),
        }
    }
}

impl Cell {
    fn json(&self) -> serde_json::Value {
        match self {
            Cell::U(v) => serde_json::json!(v),
            Cell::F(v) => serde_json::json!(v),
            Cell::S(v) => serde_json::json!(v),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

/// Everything a run writes goes through one sink so the manifest can list
/// it; stray writes would escape the reproducibility contract.
pub struct Sink {
    root: PathBuf,
    format: Format,
    outputs: Vec<String>,
    started_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Sink {
    pub fn new(root: &Path, format: Format) -> Result<Sink> {
        fs::create_dir_all(root)?;
        Ok(Sink {
            root: root.to_path_buf(),
            format,
            outputs: Vec::new(),
            started_unix: unix_now(),
        })
    }

    fn record(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.root.join(name)
    }

    /// Write a table under `stem` in the selected format.
    pub fn write_table(
        &mut self,
        stem: &str,
        columns: &[&str],
        rows: &[Vec<Cell>],
    ) -> Result<PathBuf> {
        match self.format {
            Format::Csv => {
                let mut text = String::new();
                text.push_str(&columns.join(","));
                text.push('\n');
                for row in rows {
                    let fields: Vec<String> =
                        row.iter().map(|c| c.to_string()).collect();
                    text.push_str(&fields.join(","));
                    text.push('\n');
                }
                let path = self.record(&format!("{stem}.csv"));
                fs::write(&path, text)?;
                Ok(path)
            }
            Format::Json => {
                let objects: Vec<serde_json::Value> = rows
                    .iter()
                    .map(|row| {
                        let mut map = serde_json::Map::new();
                        for (name, cell) in columns.iter().zip(row) {
                            map.insert(name.to_string(), cell.json());
                        }
                        serde_json::Value::Object(map)
                    })
                    .collect();
                let path = self.record(&format!("{stem}.json"));
                fs::write(&path, pretty(&objects)?)?;
                Ok(path)
            }
        }
    }

    /// Write a structured report; always JSON regardless of table format.
    pub fn write_report<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.record(name);
        fs::write(&path, pretty(value)?)?;
        Ok(path)
    }

    /// Close the run: write `manifest.json` listing every output.
    pub fn finish(mut self, command: &str, config_hash: &str, seed: u64) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            config_hash: &'a str,
            seed: u64,
            module_versions: ModuleVersions,
            started_unix: u64,
            finished_unix: u64,
            outputs: &'a [String],
        }
        #[derive(Serialize)]
        struct ModuleVersions {
            tfim_core: &'static str,
            tfim_cli: &'static str,
        }
        let manifest = Manifest {
            command,
            config_hash,
            seed,
            module_versions: ModuleVersions {
                tfim_core: tfim_core::VERSION,
                tfim_cli: env!("CARGO_PKG_VERSION"),
            },
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            outputs: &self.outputs,
        };
        let body = pretty(&manifest)?;
        let path = self.root.join("manifest.json");
        fs::write(&path, body)?;
        self.outputs.push("manifest.json".to_string());
        Ok(path)
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(format!("serializing output: {e}")))?;
    text.push('\n');
    Ok(text)
}
