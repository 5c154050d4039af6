//! Report rows and deterministic CSV/JSON emission.
//!
//! Every row type starts with the (experiment, seed, n) replay key. CSV is
//! the primary artifact: a header line plus one line per row (header-only
//! when the report is empty). JSON mirrors the rows and adds the full
//! config echo and summary counters. Field values are written with
//! shortest-roundtrip float formatting, so equal reports are byte-equal.

use crate::config::{ExperimentConfig, OutputFormat};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub q: f64,
    pub replicas: u64,
    /// TV distance against the exact distribution; empty when n > 9
    pub tv_vs_oracle: Option<f64>,
    pub mean_inversions: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub replica: u64,
    pub i: usize,
    pub t: f64,
    pub position: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub replica: u64,
    pub max_sup_dev: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRow {
    pub experiment: String,
    pub seed: u64,
    /// 0: the doubly infinite process has no system size
    pub n: usize,
    pub replica: u64,
    pub t_horizon: f64,
    /// verified transposition events on the window
    pub events: u64,
    pub all_exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub replica: u64,
    pub k_n: i64,
    pub window_lo: i64,
    pub window_hi: i64,
    pub t_horizon: f64,
    pub all_agree: bool,
    pub max_ratio: f64,
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub check: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// CSV column names of a row type, used for header-only empty reports.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
}

impl CsvRow for SampleRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "seed",
        "n",
        "q",
        "replicas",
        "tv_vs_oracle",
        "mean_inversions",
    ];
}

impl CsvRow for TrajectoryRow {
    const HEADER: &'static [&'static str] =
        &["experiment", "seed", "n", "replica", "i", "t", "position"];
}

impl CsvRow for DeviationRow {
    const HEADER: &'static [&'static str] =
        &["experiment", "seed", "n", "replica", "max_sup_dev", "p50", "p95"];
}

impl CsvRow for LocalRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "seed",
        "n",
        "replica",
        "t_horizon",
        "events",
        "all_exact",
    ];
}

impl CsvRow for CouplingRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "seed",
        "n",
        "replica",
        "k_n",
        "window_lo",
        "window_hi",
        "t_horizon",
        "all_agree",
        "max_ratio",
        "proposed",
        "accepted",
    ];
}

impl CsvRow for OracleRow {
    const HEADER: &'static [&'static str] =
        &["experiment", "seed", "n", "check", "value", "bound", "pass"];
}

/// A finished experiment: config echo, typed rows, and deterministic
/// summary counters (no wall-clock values — those go to stderr).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<R> {
    pub config: ExperimentConfig,
    pub rows: Vec<R>,
    pub summary: BTreeMap<String, f64>,
}

impl<R: Serialize + PartialEq + CsvRow> Report<R> {
    pub fn new(config: ExperimentConfig, rows: Vec<R>) -> Self {
        Report {
            config,
            rows,
            summary: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.summary.insert(key.to_string(), value);
        self
    }

    pub fn render(&self) -> Result<Vec<u8>, String> {
        match self.config.format {
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                if self.rows.is_empty() {
                    w.write_record(R::HEADER).map_err(|e| e.to_string())?;
                } else {
                    for row in &self.rows {
                        w.serialize(row).map_err(|e| e.to_string())?;
                    }
                }
                w.into_inner().map_err(|e| e.to_string())
            }
            OutputFormat::Json => {
                let mut buf =
                    serde_json::to_vec_pretty(self).map_err(|e| e.to_string())?;
                buf.push(b'\n');
                Ok(buf)
            }
        }
    }

    /// Write to the configured destination (stdout when no path is set).
    pub fn emit(&self) -> Result<(), String> {
        let bytes = self.render()?;
        match &self.config.out {
            Some(path) => write_file(path, &bytes),
            None => std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| e.to_string()),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
