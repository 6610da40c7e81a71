//! CSV persistence for experiment outputs.
//!
//! Every file has a header row and a fixed column order given by the field
//! order of its record type. Floats are written in shortest round-trip form,
//! so re-reading a file reproduces the in-memory values exactly. Missing
//! values (for example the error of a diverged trial) are empty cells.
//!
//! | file | columns |
//! |------|---------|
//! | `trials.csv` | trial, status, positioning_error, final_cost, convex_cost, iterations, broadcast_count, message |
//! | `cdf.csv` | error, fraction |
//! | `bounds.csv` | loss, trials, true_gap, posterior_bound, apriori_bound |
//! | `bounds_trials.csv` | trial, loss, true_gap, posterior_bound, apriori_bound |
//! | `trajectory.csv` (sync) | iteration, cost, max_x_change, broadcast_count |
//! | `trajectory.csv` (async) | activation, node, cost, phi, broadcast_count |
//! | `sweep.csv` | probability, loss, mean_error, ci95, failures |
//! | `compare.csv` | sigma, solver, mean_error, ci95, broadcast_count, failures |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `rows` with a header derived from the record type.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads records written by [`write_rows`]. The header must match the
/// record type's columns exactly.
pub fn read_rows<T: DeserializeOwned, R: Read>(input: R, columns: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?;
    if header.iter().ne(columns.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected columns {}, found {}",
            columns.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

pub fn write_rows_to_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_rows(rows, file)
}

pub const TRIAL_COLUMNS: &[&str] = &[
    "trial",
    "status",
    "positioning_error",
    "final_cost",
    "convex_cost",
    "iterations",
    "broadcast_count",
    "message",
];
pub const CDF_COLUMNS: &[&str] = &["error", "fraction"];
pub const BOUNDS_COLUMNS: &[&str] = &["loss", "trials", "true_gap", "posterior_bound", "apriori_bound"];
pub const BOUNDS_TRIAL_COLUMNS: &[&str] = &["trial", "loss", "true_gap", "posterior_bound", "apriori_bound"];
pub const SYNC_TRAJECTORY_COLUMNS: &[&str] = &["iteration", "cost", "max_x_change", "broadcast_count"];
pub const ASYNC_TRAJECTORY_COLUMNS: &[&str] = &["activation", "node", "cost", "phi", "broadcast_count"];
pub const SWEEP_COLUMNS: &[&str] = &["probability", "loss", "mean_error", "ci95", "failures"];
pub const COMPARE_COLUMNS: &[&str] = &["sigma", "solver", "mean_error", "ci95", "broadcast_count", "failures"];

/// Parses a `trials.csv` document.
pub fn parse_trials_csv<R: Read>(input: R) -> Result<Vec<crate::harness::TrialResult>> {
    let rows: Vec<crate::harness::TrialResult> = read_rows(input, TRIAL_COLUMNS)?;
    for row in &rows {
        row.check()?;
    }
    Ok(rows)
}
