//! Reports and their JSON / CSV rendering.
//!
//! JSON objects are key-sorted and floats use the shortest round-trip form,
//! so identical runs give byte-identical reports. Timings are only present
//! when requested with `--timings`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

/// A number together with its units and the tolerance it was checked against.
pub fn quantity(value: f64, units: &str, tolerance: Option<f64>) -> Value {
    json!({ "value": value, "units": units, "tolerance": tolerance })
}

/// One pass/fail invariant of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub units: String,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64, units: &str) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            units: units.into(),
        }
    }
}

/// Rows for CSV output, with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub config: RunConfig,
    pub seed: u64,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl Report {
    pub fn new(config: &RunConfig, results: Value, checks: Vec<Check>, table: Option<Table>) -> Self {
        Self {
            command: config.command.name(),
            config: config.clone(),
            seed: config.seed,
            passed: checks.iter().all(|c| c.passed),
            results,
            checks,
            timings: None,
            table,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let table = self
            .table
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("`{}` has no CSV table; use --format json", self.command)))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        };
        w.write_record(&table.header).map_err(io)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Writes the rendered report to `path`, or to standard output.
pub fn emit(report: &Report, format: Format, path: Option<&std::path::Path>) -> Result<(), CliError> {
    let text = report.render(format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            message: e.to_string(),
        }),
    }
}
