//! Deterministic CSV tables and the JSON summary report.

use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Fixed-width scientific notation keeps reruns byte-identical.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvTable {
    path: PathBuf,
    lines: Vec<String>,
}

impl CsvTable {
    pub fn new(dir: &Path, name: &str, digest: &str, header: &[&str]) -> Self {
        CsvTable {
            path: dir.join(name),
            lines: vec![format!("# config {digest}"), header.join(",")],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn comment(&mut self, text: &str) {
        self.lines.push(format!("# {text}"));
    }

    pub fn write(self) -> std::io::Result<PathBuf> {
        let mut f = std::fs::File::create(&self.path)?;
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(self.path)
    }
}

#[derive(Debug, Serialize)]
pub struct SummaryReport {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub status: String,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckSummary>,
}

#[derive(Debug, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub status: String,
    pub defect: f64,
    pub tolerance: f64,
    pub wall_seconds: f64,
}

pub fn write_summary(dir: &Path, report: &SummaryReport) -> std::io::Result<PathBuf> {
    let path = dir.join("summary.json");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "{}", serde_json::to_string_pretty(report)?)?;
    Ok(path)
}
