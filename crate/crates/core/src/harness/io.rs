//! Output directory layout: `manifest.json`, `tables/*.csv`, and
//! `fields/*.csv` with a JSON sidecar per field. Floats carry 17
//! significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cli::Invocation;
use super::studies::ExperimentPlan;
use super::HarnessError;
use crate::grid::{snapshot_csv, Field};
use crate::numerics::fmt17;
use crate::splitting::Partition;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Float(v) => out.push_str(&fmt17(*v)),
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Metadata written next to every field snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub problem: String,
    pub quantity: String,
    pub epsilon: f64,
    pub time: f64,
    /// Sample stream, or `None` for an ensemble mean.
    pub sample: Option<u64>,
}

/// Pass/fail record of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub seconds: f64,
}

/// Everything needed to rerun a command bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    pub plan: Option<ExperimentPlan>,
    pub partitions: Vec<Partition>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub criteria: Vec<CriterionResult>,
}

impl RunManifest {
    pub fn new(invocation: Invocation, threads: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation,
            plan: None,
            partitions: Vec::new(),
            seeds: Vec::new(),
            threads,
            wall_clock_seconds: 0.0,
            criteria: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.into(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.into(),
            source,
        })
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        for sub in ["tables", "fields"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|source| HarnessError::Io { path: p, source })?;
        }
        Ok(Self { root: root.into() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write(&self, rel: &str, text: &str) -> Result<PathBuf, HarnessError> {
        let path = self.root.join(rel);
        fs::write(&path, text).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn write_table(&self, table: &Table) -> Result<PathBuf, HarnessError> {
        self.write(&format!("tables/{}.csv", table.name), &table.to_csv())
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<PathBuf, HarnessError> {
        let path = self.root.join(rel);
        let text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
            path: path.clone(),
            source,
        })?;
        self.write(rel, &(text + "\n"))
    }

    pub fn write_field(
        &self,
        name: &str,
        field: &Field,
        sidecar: &FieldSidecar,
    ) -> Result<PathBuf, HarnessError> {
        self.write_json(&format!("fields/{name}.json"), sidecar)?;
        self.write(&format!("fields/{name}.csv"), &snapshot_csv(field))
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<PathBuf, HarnessError> {
        self.write_json("manifest.json", manifest)
    }
}

/// Relative paths of every CSV under `tables/` and `fields/`, sorted.
pub fn list_csv(root: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    for sub in ["tables", "fields"] {
        let dir = root.join(sub);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(source) => return Err(HarnessError::Io { path: dir, source }),
        };
        for e in entries {
            let e = e.map_err(|source| HarnessError::Io {
                path: dir.clone(),
                source,
            })?;
            let p = e.path();
            if p.extension().is_some_and(|x| x == "csv") {
                out.push(Path::new(sub).join(e.file_name()));
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_formats_with_full_precision() {
        let mut t = Table::new("demo", &["eps", "n", "tag"]);
        t.push(vec![0.1.into(), 3usize.into(), "x".into()]);
        let csv = t.to_csv();
        assert_eq!(csv, "eps,n,tag\n1.0000000000000001e-1,3,x\n");
        let back: f64 = csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
