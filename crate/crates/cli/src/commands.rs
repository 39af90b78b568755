use std::path::{Path, PathBuf};

use nonmarkov::laplace::verify_resolvent_modified;
use nonmarkov::{certify_trajectory, f_closed_form, verify_resolvent, ResolventReport, Thresholds, Trajectory64, Verdict};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::report::{
    write_analytic_table, write_json, write_sweep_csv, CertificateReport, ResolventJson, SweepRow, SweepSummary,
};
use crate::scenario::{RunOptions, Scenario, Solved};
use crate::trajectory_csv::{read_trajectory, write_trajectory};

/// Outcome of a command that did not hit an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// NOT_CP found while `--require-cp` was set.
    NotCp,
    /// A resolvent check was evaluated and did not pass.
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::NotCp => 2,
            Outcome::CheckFailed => 1,
        }
    }
}

/// Summary returned by [`run`] for callers that want more than the exit code.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub verdict: Option<Verdict>,
    pub first_not_cp_time: Option<f64>,
    pub resolvent_pass: Option<bool>,
    pub written: Vec<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn resolvent_report(
    scenario: &Scenario,
    solved: &Solved,
    traj: &Trajectory64,
    p_values: &[f64],
    tol: f64,
) -> Result<ResolventReport<f64>> {
    let pr = &solved.problem;
    let report = if scenario.is_modified_form() {
        if scenario.is_normalized_output() {
            return Err(CliError::Invalid(format!(
                "scenario '{}': the resolvent check needs the unnormalized V_t; set normalize = false",
                scenario.name
            )));
        }
        verify_resolvent_modified(traj, &pr.generator, &pr.kernel.cp_part, p_values, tol)
    } else {
        verify_resolvent(traj, &pr.generator, &pr.kernel, p_values, tol)
    };
    report.map_err(|e| CliError::library(&scenario.name, e))
}

fn form_name(scenario: &Scenario) -> &'static str {
    if scenario.is_modified_form() {
        "modified"
    } else {
        "master"
    }
}

/// `run`: solve one scenario and write its artifacts into `out`.
pub fn run(config: &Path, out: &Path, opts: &RunOptions, stride: usize, require_cp: bool) -> Result<RunSummary> {
    let scenario = Scenario::load(config)?;
    ensure_dir(out)?;
    let solved = scenario.solve(None, opts)?;
    let traj = &solved.trajectory;
    let mut summary =
        RunSummary { outcome: Outcome::Success, verdict: None, first_not_cp_time: None, resolvent_pass: None, written: vec![] };

    if scenario.outputs.trajectory {
        let path = out.join("trajectory.csv");
        write_trajectory(&path, traj, scenario.outputs.trajectory_stride)?;
        summary.written.push(path);
    }

    let needs_certificate = scenario.outputs.certificate || require_cp;
    if needs_certificate {
        let cert = certify_trajectory(traj, &Thresholds::default(), stride);
        summary.verdict = Some(cert.verdict());
        summary.first_not_cp_time = cert.first_not_cp_time;
        if scenario.outputs.certificate {
            let path = out.join("certificate.json");
            write_json(&path, &CertificateReport::new(&scenario.name, traj, &cert, stride))?;
            summary.written.push(path);
        }
        if require_cp && cert.any_not_cp() {
            summary.outcome = Outcome::NotCp;
        }
    }

    if let Some(check) = &scenario.outputs.resolvent_check {
        let report = resolvent_report(&scenario, &solved, traj, &check.p_values, check.tol)?;
        let path = out.join("resolvent.json");
        write_json(&path, &ResolventJson::new(&scenario.name, form_name(&scenario), &report))?;
        summary.written.push(path);
        summary.resolvent_pass = Some(report.pass());
        if !report.pass() && summary.outcome == Outcome::Success {
            summary.outcome = Outcome::CheckFailed;
        }
    }
    Ok(summary)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepRange {
    pub gamma_min: Option<f64>,
    pub gamma_max: Option<f64>,
    pub steps: Option<usize>,
}

/// `sweep`: solve the scenario for every gamma on a uniform grid, in parallel.
pub fn sweep(
    config: &Path,
    out: &Path,
    range: SweepRange,
    opts: &RunOptions,
    stride: usize,
    require_cp: bool,
) -> Result<(Outcome, SweepSummary)> {
    let scenario = Scenario::load(config)?;
    let defaults = scenario.sweep.clone();
    let gamma_min = range.gamma_min.or(defaults.as_ref().map(|s| s.gamma_min)).unwrap_or(0.5);
    let gamma_max = range.gamma_max.or(defaults.as_ref().map(|s| s.gamma_max)).unwrap_or(1.5);
    let steps = range.steps.or(defaults.as_ref().map(|s| s.steps)).unwrap_or(21);
    if steps < 3 {
        return Err(CliError::Invalid(format!("sweep needs at least 3 steps, got {steps}")));
    }
    if !(gamma_min >= 0.0 && gamma_max > gamma_min) {
        return Err(CliError::Invalid(format!("invalid gamma range [{gamma_min}, {gamma_max}]")));
    }
    ensure_dir(out)?;
    let gammas: Vec<f64> =
        (0..steps).map(|i| gamma_min + (gamma_max - gamma_min) * i as f64 / (steps - 1) as f64).collect();
    let th = Thresholds::default();
    let rows: Vec<SweepRow> = gammas
        .par_iter()
        .map(|&gamma| {
            let solved = scenario.solve(Some(gamma), opts)?;
            let cert = certify_trajectory(&solved.trajectory, &th, stride);
            log::info!("gamma = {gamma}: {}", cert.verdict().as_str());
            Ok(SweepRow {
                gamma,
                min_choi_eigenvalue: cert.global_min_choi_eigenvalue,
                verdict: cert.verdict().as_str().to_owned(),
                first_not_cp_time: cert.first_not_cp_time,
            })
        })
        .collect::<Result<_>>()?;

    write_sweep_csv(&out.join("sweep.csv"), &rows)?;
    let summary = SweepSummary::new(&scenario.name, gamma_min, gamma_max, rows);
    write_json(&out.join("sweep.json"), &summary)?;
    let outcome = if require_cp && summary.rows.iter().any(|r| r.verdict == Verdict::NotCp.as_str()) {
        Outcome::NotCp
    } else {
        Outcome::Success
    };
    Ok((outcome, summary))
}

/// `analytic-table`: `(t, f(t), branch)` at `points` equally spaced times on `[0, t_max]`.
pub fn analytic_table(kappa: f64, gamma: f64, t_max: f64, points: usize, out: &Path) -> Result<Vec<(f64, f64, &'static str)>> {
    if points < 2 {
        return Err(CliError::Invalid(format!("analytic-table needs at least 2 points, got {points}")));
    }
    if !(kappa > 0.0) || !(gamma >= 0.0) || !(t_max > 0.0) {
        return Err(CliError::Invalid("need kappa > 0, gamma >= 0 and t_max > 0".into()));
    }
    let rows: Vec<(f64, f64, &'static str)> = (0..points)
        .map(|i| {
            let t = t_max * i as f64 / (points - 1) as f64;
            let r = f_closed_form(kappa, gamma, t);
            (t, r.value, r.branch.as_str())
        })
        .collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_analytic_table(out, &rows)?;
    Ok(rows)
}

/// `verify-resolvent`: check a scenario's trajectory, either re-solved or read back from CSV.
pub fn verify(
    config: &Path,
    trajectory: Option<&Path>,
    p_values: Option<Vec<f64>>,
    tol: Option<f64>,
    out: &Path,
    opts: &RunOptions,
) -> Result<(Outcome, ResolventJson)> {
    let scenario = Scenario::load(config)?;
    let check = scenario.outputs.resolvent_check.clone();
    let p_values = p_values
        .or_else(|| check.as_ref().map(|c| c.p_values.clone()))
        .ok_or_else(|| CliError::Invalid("no p values: pass --p-values or set outputs.resolvent_check".into()))?;
    let tol = tol.or(check.map(|c| c.tol)).unwrap_or(1e-3);
    ensure_dir(out)?;
    let solved = match trajectory {
        Some(path) => {
            let problem = scenario.problem(None, opts)?;
            let traj = read_trajectory(path)?;
            Solved { problem, trajectory: traj }
        }
        None => scenario.solve(None, opts)?,
    };
    let report = resolvent_report(&scenario, &solved, &solved.trajectory, &p_values, tol)?;
    let json = ResolventJson::new(&scenario.name, form_name(&scenario), &report);
    write_json(&out.join("resolvent.json"), &json)?;
    let outcome = if report.pass() { Outcome::Success } else { Outcome::CheckFailed };
    Ok((outcome, json))
}
