//! Files written per experiment and the run manifest.

use std::fs;
use std::path::Path;

use ewlab_core::report::num;
use ewlab_core::ExperimentReport;
use serde::{Deserialize, Serialize};

/// A CSV table beyond the standard report rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| num(*v)).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
    /// `(file stem, svg document)`.
    pub plots: Vec<(String, String)>,
    /// `(file name, bytes)` for binary dumps.
    pub blobs: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn new(report: ExperimentReport) -> Self {
        Self {
            report,
            ..Default::default()
        }
    }

    /// Writes everything under `dir`, returning paths relative to `root`.
    pub fn write(&self, root: &Path, dir: &Path) -> std::io::Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> std::io::Result<()> {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            let rel = path.strip_prefix(root).unwrap_or(&path);
            files.push(rel.to_string_lossy().replace('\\', "/"));
            Ok(())
        };
        put("report.json", self.report.to_json().as_bytes())?;
        put("report.csv", self.report.csv_string().as_bytes())?;
        let mut checks = Vec::new();
        self.report.write_checks_csv(&mut checks)?;
        put("checks.csv", &checks)?;
        for t in &self.tables {
            put(&format!("{}.csv", t.name), t.to_csv().as_bytes())?;
        }
        for (name, svg) in &self.plots {
            put(&format!("{name}.svg"), svg.as_bytes())?;
        }
        for (name, bytes) in &self.blobs {
            put(name, bytes)?;
        }
        Ok(files)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub os: String,
    pub arch: String,
    pub family: String,
    pub pointer_width: usize,
}

impl Platform {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            family: std::env::consts::FAMILY.into(),
            pointer_width: usize::BITS as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEntry {
    pub name: String,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionEntry {
    pub id: u32,
    pub title: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub platform: Platform,
    pub seed: u64,
    pub workers: usize,
    pub projected_cell_updates: f64,
    pub wall_clock_seconds: f64,
    pub experiments: Vec<ExperimentEntry>,
    pub criteria: Vec<CriterionEntry>,
    pub passed: bool,
}

impl RunManifest {
    pub fn write(&self, root: &Path) -> std::io::Result<()> {
        fs::create_dir_all(root)?;
        let json = serde_json::to_string_pretty(self).expect("manifest is serialisable");
        fs::write(root.join("manifest.json"), json)
    }
}
