//! CSV and JSON outputs.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::risk::{BandRow, CoverageRow, MseRow};

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `setting, method, mse, mc_se`.
pub fn write_mse_csv(path: &Path, rows: &[MseRow]) -> Result<()> {
    write_rows(path, rows)
}

/// Columns `setting, method, coverage_mean_pct, coverage_sd, n_predictive, n_truth`.
pub fn write_coverage_csv(path: &Path, rows: &[CoverageRow]) -> Result<()> {
    write_rows(path, rows)
}

/// Columns `t, true_f, method, lower, mean, upper`.
pub fn write_band_csv(path: &Path, rows: &[BandRow]) -> Result<()> {
    write_rows(path, rows)
}

/// Provenance of one CLI invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub version: String,
    pub workers: usize,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
    /// Effective parameters after merging the config file and flags.
    pub parameters: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}
