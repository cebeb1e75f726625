//! Run reports: per-criterion verdicts, metrics and artifact paths.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    /// Measured value; `None` when it is not finite.
    pub metric: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
    pub metrics: BTreeMap<String, Option<f64>>,
    /// File names relative to the run directory.
    pub artifacts: Vec<String>,
    pub software_version: String,
    pub config: Value,
    /// Runtime failure that stopped the experiment, if any.
    pub error: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl RunReport {
    pub fn new(experiment: &str, config: Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            passed: false,
            criteria: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            error: None,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), finite(value));
    }

    /// Record a criterion; `passed` is decided by the caller.
    pub fn criterion(&mut self, name: &str, passed: bool, metric: f64, threshold: f64, detail: impl Into<String>) {
        self.criteria.push(CriterionResult {
            name: name.to_string(),
            passed,
            metric: finite(metric),
            threshold: finite(threshold),
            detail: detail.into(),
        });
    }

    /// `metric < threshold`.
    pub fn below(&mut self, name: &str, metric: f64, threshold: f64) {
        let passed = metric < threshold;
        self.criterion(name, passed, metric, threshold, format!("{metric:e} < {threshold:e}"));
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    /// Set `passed` from the criteria and the error slot.
    pub fn finish(&mut self) {
        self.passed = self.error.is_none() && !self.criteria.is_empty() && self.criteria.iter().all(|c| c.passed);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join(REPORT_FILE), text + "\n")
    }

    pub fn read(dir: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(dir.join(REPORT_FILE))?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Human-readable summary, one line per criterion.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}\n", self.experiment, if self.passed { "PASS" } else { "FAIL" });
        for c in &self.criteria {
            out += &format!(
                "  [{}] {}: {}\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        if let Some(e) = &self.error {
            out += &format!("  error: {e}\n");
        }
        out
    }
}
