//! Suite reports: verdicts and statistics go to `report.json`, raw
//! per-replica values to `data.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::stats::{EstimateWithError, ScalingReport, SeedLedger, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

/// One named comparison. Non-gating checks are reported but do not affect
/// the suite verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub gating: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn gating(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            gating: true,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn info(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            gating: false,
            ..Check::gating(name, passed, value, threshold, detail)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: EstimateWithError,
}

/// Rows of `data.csv`; cells are preformatted so the bytes are a pure
/// function of the computed values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl DataTable {
    pub fn new(header: &[&str]) -> Self {
        DataTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// Shortest round-trip formatting of a float cell.
pub fn cell(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub estimates: Vec<NamedEstimate>,
    pub scaling: Vec<ScalingReport>,
    pub seeds: SeedLedger,
    #[serde(skip)]
    pub data: DataTable,
}

impl SuiteReport {
    pub fn new(suite: &str, master_seed: u64, header: &[&str]) -> Self {
        SuiteReport {
            schema_version: SCHEMA_VERSION,
            suite: suite.to_string(),
            verdict: Verdict::Pass,
            checks: Vec::new(),
            estimates: Vec::new(),
            scaling: Vec::new(),
            seeds: SeedLedger::new(master_seed),
            data: DataTable::new(header),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn estimate(&mut self, name: &str, estimate: EstimateWithError) {
        self.estimates.push(NamedEstimate {
            name: name.to_string(),
            estimate,
        });
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn find_estimate(&self, name: &str) -> Option<&EstimateWithError> {
        self.estimates.iter().find(|e| e.name == name).map(|e| &e.estimate)
    }

    pub fn find_scaling(&self, label: &str) -> Option<&ScalingReport> {
        self.scaling.iter().find(|s| s.label == label)
    }

    /// Sets the verdict from the gating checks.
    pub fn finish(mut self) -> Self {
        self.verdict = Verdict::from_bool(self.checks.iter().filter(|c| c.gating).all(|c| c.passed));
        self
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.gating && !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.json` and `data.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json() + "\n")?;
        fs::write(dir.join("data.csv"), self.data.to_csv())?;
        Ok(())
    }

    pub fn read_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}
