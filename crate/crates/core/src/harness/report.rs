use std::path::Path;

use crate::csvfmt::{check_header, fmt_f64, parse};
use crate::error::{Error, Result};
use crate::netmodel::NodeId;

pub const REPORT_HEADER: [&str; 8] = ["trial", "n", "agent", "true_x", "true_y", "est_x", "est_y", "error"];

/// One agent at one time step of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub trial: usize,
    pub n: usize,
    pub agent: NodeId,
    pub true_x: f64,
    pub true_y: f64,
    pub est_x: f64,
    pub est_y: f64,
    /// `‖p̂ − p‖` in meters.
    pub error: f64,
}

/// Per-trial bookkeeping; kept out of the CSV so that reports stay byte-reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialStats {
    pub trial: usize,
    pub solves: usize,
    pub failures: usize,
    pub unconverged: usize,
    /// Agents whose prior fell back to a uniform draw on the region.
    pub fallback_priors: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub trials: Vec<TrialStats>,
}

impl RunReport {
    pub fn errors_at(&self, n: usize) -> Result<Vec<f64>> {
        let errs: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.error).collect();
        if errs.is_empty() {
            Err(Error::EmptyData(n))
        } else {
            Ok(errs)
        }
    }

    /// Time indices present, ascending.
    pub fn time_indices(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.trial.to_string(),
                r.n.to_string(),
                r.agent.0.to_string(),
                fmt_f64(r.true_x),
                fmt_f64(r.true_y),
                fmt_f64(r.est_x),
                fmt_f64(r.est_y),
                fmt_f64(r.error),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        check_header(&mut r, &REPORT_HEADER, path)?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = ReportRow {
                trial: parse(&rec, 0, path)?,
                n: parse(&rec, 1, path)?,
                agent: NodeId(parse(&rec, 2, path)?),
                true_x: parse(&rec, 3, path)?,
                true_y: parse(&rec, 4, path)?,
                est_x: parse(&rec, 5, path)?,
                est_y: parse(&rec, 6, path)?,
                error: parse(&rec, 7, path)?,
            };
            if !(row.error >= 0.0) {
                return Err(Error::Parse { path: path.to_owned(), reason: format!("negative error {}", row.error) });
            }
            rows.push(row);
        }
        Ok(Self { rows, trials: Vec::new() })
    }
}

/// Fraction of `(trial, agent)` pairs at time `n` whose error exceeds each `τ`.
pub fn outage_curve(report: &RunReport, n: usize, taus: &[f64]) -> Result<Vec<f64>> {
    let errs = report.errors_at(n)?;
    let total = errs.len() as f64;
    Ok(taus.iter().map(|&tau| errs.iter().filter(|&&e| e > tau).count() as f64 / total).collect())
}

pub fn rmse(report: &RunReport, n: usize) -> Result<f64> {
    let errs = report.errors_at(n)?;
    Ok((errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt())
}

pub fn mean_error(report: &RunReport, n: usize) -> Result<f64> {
    let errs = report.errors_at(n)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// `0, 0.1, …, 4.0`.
pub fn default_tau_grid() -> Vec<f64> {
    (0..=40).map(|i| i as f64 / 10.0).collect()
}

pub const CURVE_HEADER: [&str; 5] = ["n", "tau", "p_out", "rmse", "count"];

/// Outage curve for every time index in the report, one row per `(n, τ)`.
pub fn write_curve_csv(report: &RunReport, taus: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CURVE_HEADER)?;
    for n in report.time_indices() {
        let curve = outage_curve(report, n, taus)?;
        let r = rmse(report, n)?;
        let count = report.errors_at(n)?.len();
        for (tau, p) in taus.iter().zip(curve) {
            w.write_record([n.to_string(), fmt_f64(*tau), fmt_f64(p), fmt_f64(r), count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
