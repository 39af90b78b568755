//! JSON and CSV report payloads. `serde_json` prints floats in shortest
//! round-trip form, so identical inputs give byte-identical files.

use std::io::Write;
use std::path::Path;

use nonmarkov::laplace::ResolventEntry;
use nonmarkov::{ResolventReport, Trajectory64, TrajectoryCertificate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCertificate {
    pub t: f64,
    pub min_choi_eigenvalue: f64,
    pub unitality_residual: f64,
    pub trace_residual: f64,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub scenario: String,
    pub label: String,
    pub dim: usize,
    pub dt: f64,
    pub t_max: f64,
    pub tol: f64,
    pub tol_strict: f64,
    pub stride: usize,
    pub verdict: String,
    pub all_cp: bool,
    pub global_min_choi_eigenvalue: f64,
    pub first_not_cp_time: Option<f64>,
    pub max_unitality_residual: f64,
    pub samples: Vec<SampleCertificate>,
}

impl CertificateReport {
    pub fn new(scenario: &str, traj: &Trajectory64, cert: &TrajectoryCertificate<f64>, stride: usize) -> Self {
        let samples: Vec<SampleCertificate> = cert
            .entries
            .iter()
            .map(|(t, c)| SampleCertificate {
                t: *t,
                min_choi_eigenvalue: c.min_choi_eigenvalue,
                unitality_residual: c.unitality_residual,
                trace_residual: c.trace_residual,
                verdict: c.verdict.as_str().to_owned(),
            })
            .collect();
        let max_unitality_residual = samples.iter().map(|s| s.unitality_residual).fold(0.0, f64::max);
        Self {
            scenario: scenario.to_owned(),
            label: traj.kind().as_str().to_owned(),
            dim: traj.dim(),
            dt: traj.dt(),
            t_max: traj.t_max(),
            tol: cert.thresholds.tol,
            tol_strict: cert.thresholds.tol_strict,
            stride,
            verdict: cert.verdict().as_str().to_owned(),
            all_cp: cert.all_cp(),
            global_min_choi_eigenvalue: cert.global_min_choi_eigenvalue,
            first_not_cp_time: cert.first_not_cp_time,
            max_unitality_residual,
            samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventEntryReport {
    pub p: f64,
    pub residual_direct: Option<f64>,
    pub residual_right: Option<f64>,
    pub residual_factored: Option<f64>,
    pub truncation_estimate: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&ResolventEntry<f64>> for ResolventEntryReport {
    fn from(e: &ResolventEntry<f64>) -> Self {
        Self {
            p: e.p,
            residual_direct: finite(e.residual_direct),
            residual_right: finite(e.residual_right),
            residual_factored: finite(e.residual_factored),
            truncation_estimate: finite(e.truncation_estimate),
            bound: finite(e.bound),
            pass: e.pass,
            error: e.error.as_ref().map(ToString::to_string),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventJson {
    pub scenario: String,
    pub form: String,
    pub tol: f64,
    pub abscissa_margin: f64,
    pub pass: bool,
    pub entries: Vec<ResolventEntryReport>,
}

impl ResolventJson {
    pub fn new(scenario: &str, form: &str, report: &ResolventReport<f64>) -> Self {
        Self {
            scenario: scenario.to_owned(),
            form: form.to_owned(),
            tol: report.tol,
            abscissa_margin: report.abscissa_margin,
            pass: report.pass(),
            entries: report.entries.iter().map(Into::into).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub min_choi_eigenvalue: f64,
    pub verdict: String,
    pub first_not_cp_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub steps: usize,
    /// Midpoint of the last NOT_CP and the first CP gamma above it.
    pub threshold_estimate: Option<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn new(scenario: &str, gamma_min: f64, gamma_max: f64, rows: Vec<SweepRow>) -> Self {
        let last_not_cp = rows.iter().filter(|r| r.verdict == "NOT_CP").map(|r| r.gamma).reduce(f64::max);
        let threshold_estimate = last_not_cp.and_then(|lo| {
            rows.iter()
                .filter(|r| r.verdict == "CP" && r.gamma > lo)
                .map(|r| r.gamma)
                .reduce(f64::min)
                .map(|hi| 0.5 * (lo + hi))
        });
        Self { scenario: scenario.to_owned(), gamma_min, gamma_max, steps: rows.len(), threshold_estimate, rows }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Invalid(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let csv_err = |e: csv::Error| CliError::Csv { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["gamma", "min_choi_eigenvalue", "verdict", "first_not_cp_time"]).map_err(csv_err)?;
    for r in rows {
        let first = r.first_not_cp_time.map(crate::trajectory_csv::format_float).unwrap_or_default();
        w.write_record([
            crate::trajectory_csv::format_float(r.gamma),
            crate::trajectory_csv::format_float(r.min_choi_eigenvalue),
            r.verdict.clone(),
            first,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_analytic_table(path: &Path, rows: &[(f64, f64, &'static str)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(out, "t,f,branch").map_err(io)?;
    for (t, f, branch) in rows {
        writeln!(out, "{},{},{branch}", crate::trajectory_csv::format_float(*t), crate::trajectory_csv::format_float(*f))
            .map_err(io)?;
    }
    out.flush().map_err(io)
}
