//! Trace serialization: plot-ready CSV and the JSON run report.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Backend, SolverConfig};
use crate::rates::{rate_estimate, RateEstimate};
use crate::solver::{SolveTrace, TraceRecord};

pub const CSV_COLUMNS: [&str; 9] = [
    "k",
    "xi_k",
    "xi_p",
    "g_norm",
    "f_xp",
    "e_k",
    "theta_k",
    "oracle_calls",
    "inner_iters",
];

/// One CSV row. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub k: usize,
    pub xi_k: f64,
    pub xi_p: f64,
    pub g_norm: f64,
    pub f_xp: Option<f64>,
    pub e_k: Option<f64>,
    pub theta_k: Option<f64>,
    pub oracle_calls: usize,
    pub inner_iters: usize,
}

impl From<&TraceRecord> for CsvRow {
    fn from(r: &TraceRecord) -> Self {
        Self {
            k: r.k,
            xi_k: r.xi_k,
            xi_p: r.xi_p,
            g_norm: r.g_norm,
            f_xp: r.f_xp,
            e_k: r.e_k,
            theta_k: r.theta_k,
            oracle_calls: r.oracle_calls,
            inner_iters: r.inner_iters,
        }
    }
}

pub fn csv_rows(trace: &SolveTrace) -> Vec<CsvRow> {
    trace.records.iter().map(CsvRow::from).collect()
}

pub fn write_trace_csv<W: Write>(out: W, trace: &SolveTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.records.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for row in csv_rows(trace) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_csv_string(trace: &SolveTrace) -> Result<String> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Totals {
    /// Sum of per-iteration oracle calls.
    pub oracle_calls: usize,
    pub cuts: usize,
    pub inner_iters: usize,
    /// Calls made before the first iteration (evaluating `x0`).
    pub setup_calls: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub backend: Backend,
    pub config: SolverConfig,
    pub trace: SolveTrace,
    pub rates: RateEstimate,
    pub wall_time_s: f64,
    pub totals: Totals,
}

impl RunReport {
    pub fn new(trace: SolveTrace, config: &SolverConfig, f_star: Option<f64>, wall_time_s: f64) -> Self {
        let totals = Totals {
            oracle_calls: trace.records.iter().map(|r| r.oracle_calls).sum(),
            cuts: trace.records.iter().map(|r| r.cuts_added).sum(),
            inner_iters: trace.total_inner_iters(),
            setup_calls: trace.setup_calls,
        };
        Self {
            problem: trace.problem.clone(),
            backend: trace.backend,
            config: config.clone(),
            rates: rate_estimate(&trace, f_star),
            trace,
            wall_time_s,
            totals,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
