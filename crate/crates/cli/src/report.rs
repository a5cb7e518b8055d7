//! Experiment reports, output files and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::CliError;

/// Whether a failure is a sampling outcome or a deterministic defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Statistical,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub name: String,
    pub kind: CriterionKind,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionOutcome {
    pub fn new(name: &str, kind: CriterionKind, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), kind, passed, detail, metrics: BTreeMap::new() }
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }
}

/// A CSV table kept in memory until the run is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: Vec<u8>,
}

impl Table {
    pub fn new(name: &str, write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Self, CliError> {
        let mut csv = Vec::new();
        write(&mut csv).map_err(|e| CliError::Output(e.to_string()))?;
        Ok(Self { name: name.to_string(), csv })
    }

    fn to_json(&self) -> Result<serde_json::Value, CliError> {
        let mut r = csv::Reader::from_reader(self.csv.as_slice());
        let header: Vec<String> =
            r.headers().map_err(|e| CliError::Output(e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::Output(e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        Ok(serde_json::json!({ "name": self.name, "columns": header, "rows": rows }))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub outcomes: Vec<CriterionOutcome>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// 0 if everything passed, 3 if a numerical criterion failed, else 2.
    pub fn exit_code(&self) -> i32 {
        let failed = |k| self.outcomes.iter().any(|o| !o.passed && o.kind == k);
        if failed(CriterionKind::Numerical) {
            3
        } else if failed(CriterionKind::Statistical) {
            2
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub tool_version: String,
    pub criteria: Vec<CriterionOutcome>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes the tables (or one `report.json`) and `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &RunConfig,
    format: Format,
    report: &Report,
    wall_time_seconds: f64,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    match format {
        Format::Csv => {
            for t in &report.tables {
                let name = format!("{}.csv", t.name);
                write_atomic(&dir.join(&name), &t.csv)?;
                outputs.push(name);
            }
        }
        Format::Json => {
            let tables = report.tables.iter().map(Table::to_json).collect::<Result<Vec<_>, _>>()?;
            let doc = serde_json::json!({ "criteria": report.outcomes, "tables": tables });
            let text = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
            write_atomic(&dir.join("report.json"), &text)?;
            outputs.push("report.json".to_string());
        }
    }
    let manifest = RunManifest {
        config: config.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        criteria: report.outcomes.clone(),
        wall_time_seconds,
        outputs,
    };
    let text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
    write_atomic(&manifest_path(dir), &text)?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
