//! JSON reports and CSV tables.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::suites::SuiteOutcome;
use crate::CliError;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Floats carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) if x.is_nan() => "nan".into(),
            Cell::Float(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorStamp {
    pub fingerprint: String,
    pub kind: opspace::OperatorKind,
    pub nodes: usize,
    pub gershgorin_bounds: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub tool: &'static str,
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub timestamp: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub operator: Option<OperatorStamp>,
    pub suites: Vec<SuiteOutcome>,
    pub pass: bool,
    pub csv_files: Vec<String>,
    pub environment: Environment,
}

impl Report {
    pub fn new(config: ExperimentConfig, seed: u64, operator: Option<OperatorStamp>, suites: Vec<SuiteOutcome>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            timestamp: chrono::Utc::now().to_rfc3339(),
            seed,
            config,
            operator,
            pass: suites.iter().all(|s| s.pass),
            suites,
            csv_files: Vec::new(),
            environment: Environment::current(),
        }
    }

    /// Writes `report.json` and, if enabled, one CSV per suite table.
    pub fn write(&mut self, dir: &Path, csv: bool) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        if csv {
            for s in &self.suites {
                for t in &s.tables {
                    let name = format!("{}_{}.csv", s.suite.name(), t.name);
                    t.write_csv(&dir.join(&name))?;
                    self.csv_files.push(name);
                }
            }
        }
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// JSON Schema of `report.json`.
pub fn schema() -> Value {
    let num = json!({ "type": ["number", "null"], "description": "null encodes a non-finite value" });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "opspace verification report",
        "type": "object",
        "required": ["schema_version", "timestamp", "seed", "config", "suites", "pass", "environment"],
        "properties": {
            "schema_version": { "const": SCHEMA_VERSION },
            "timestamp": { "type": "string", "format": "date-time" },
            "seed": { "type": "integer", "minimum": 0 },
            "config": { "type": "object", "description": "the parsed configuration with defaults filled in" },
            "operator": {
                "type": ["object", "null"],
                "properties": {
                    "fingerprint": { "type": "string", "pattern": "^[0-9a-f]{16}$" },
                    "kind": { "enum": ["laplacian", "schrodinger", "magnetic_schrodinger", "elliptic"] },
                    "nodes": { "type": "integer" },
                    "gershgorin_bounds": { "type": "array", "items": num, "minItems": 2, "maxItems": 2 }
                }
            },
            "suites": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["suite", "pass", "seed", "result"],
                    "properties": {
                        "suite": { "enum": ["decay", "heat", "partition", "retraction", "kfunc", "realinterp", "complexinterp", "maximal", "kato"] },
                        "pass": { "type": "boolean" },
                        "seed": { "type": "integer" },
                        "operator_fingerprint": { "type": ["string", "null"] },
                        "notes": { "type": "array", "items": { "type": "string" } },
                        "error": { "type": ["string", "null"] },
                        "result": { "type": ["object", "null"] }
                    }
                }
            },
            "pass": { "type": "boolean" },
            "csv_files": { "type": "array", "items": { "type": "string" } },
            "environment": {
                "type": "object",
                "properties": {
                    "tool": { "type": "string" },
                    "version": { "type": "string" },
                    "os": { "type": "string" },
                    "arch": { "type": "string" },
                    "threads": { "type": "integer" }
                }
            }
        }
    })
}
