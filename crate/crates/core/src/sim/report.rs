//! Run reports and their on-disk forms.
//!
//! With [`ReportFormat::Csv`] a run writes `timeseries.csv`, `cdf.csv` and
//! `summary.json`; with [`ReportFormat::Json`] a single `report.json`.
//! Numbers are written in shortest round-trip form, so identical runs give
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub event: usize,
    pub t: f64,
    pub source_rate: f64,
    pub mean_receiving_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub rate: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEntry {
    pub configuration: String,
    pub fraction: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub time_average_rate: f64,
    /// Hopping time average over baseline time average.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    /// `hop` or `baseline`.
    pub kind: String,
    pub seed: u64,
    pub nodes: usize,
    pub events: usize,
    pub accepted: usize,
    pub blocked: usize,
    /// Solver runs that hit the iteration budget.
    pub nonconverged: usize,
    pub initial_rate: f64,
    pub final_rate: f64,
    /// Occupancy-weighted rate after burn-in.
    pub time_average_rate: f64,
    pub fullmesh_rate: f64,
    pub distinct_configurations: usize,
    /// Most occupied configurations, at most [`OCCUPANCY_ROWS`], by
    /// decreasing fraction.
    pub occupancy: Vec<OccupancyEntry>,
    /// Fraction of time spent outside the listed configurations.
    pub occupancy_other: f64,
    pub baseline: Option<BaselineComparison>,
    /// Receiving rate of every receiver in the final configuration.
    pub receiving_cdf: Vec<CdfPoint>,
    pub time_series: Vec<Sample>,
}

pub const OCCUPANCY_ROWS: usize = 64;

impl RunReport {
    /// Everything except the time series and the CDF.
    pub fn summary(&self) -> RunReport {
        RunReport {
            time_series: Vec::new(),
            receiving_cdf: Vec::new(),
            ..self.clone()
        }
    }

    pub fn timeseries_csv(&self) -> String {
        let mut out = String::from("event,t,source_rate,mean_receiving_rate\n");
        for s in &self.time_series {
            writeln!(
                out,
                "{},{},{},{}",
                s.event, s.t, s.source_rate, s.mean_receiving_rate
            )
            .expect("string write");
        }
        out
    }

    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("rate,fraction\n");
        for p in &self.receiving_cdf {
            writeln!(out, "{},{}", p.rate, p.fraction).expect("string write");
        }
        out
    }
}

/// Empirical CDF of the given rates.
pub fn cdf(rates: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, rate)| CdfPoint {
            rate,
            fraction: (i + 1) as f64 / n,
        })
        .collect()
}

/// Writes the report into `dir`, creating it if needed; returns the paths.
pub fn emit_report(r: &RunReport, fmt: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };
    match fmt {
        ReportFormat::Csv => {
            write("timeseries.csv", r.timeseries_csv())?;
            write("cdf.csv", r.cdf_csv())?;
            write(
                "summary.json",
                serde_json::to_string_pretty(&r.summary())? + "\n",
            )?;
        }
        ReportFormat::Json => {
            write("report.json", serde_json::to_string_pretty(r)? + "\n")?;
        }
    }
    Ok(files)
}
