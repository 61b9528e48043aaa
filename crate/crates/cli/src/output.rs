//! CSV tables and the JSON summary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use kernelflows::suite::Table;
use serde::Serialize;

use crate::experiments::{Check, Report};

pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `table` with a header row, `\n` line endings and `.` decimals.
pub fn write_table(dir: &Path, table: &Table) -> io::Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    seed: u64,
    pass: bool,
    checks: &'a [Check],
    tables: Vec<String>,
}

/// Writes every table plus `summary.json` under `dir`.
pub fn write_report(dir: &Path, report: &Report) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in &report.tables {
        written.push(write_table(dir, t)?);
    }
    let summary = Summary {
        experiment: &report.experiment,
        seed: report.seed,
        pass: report.pass(),
        checks: &report.checks,
        tables: report.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
    };
    let path = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
