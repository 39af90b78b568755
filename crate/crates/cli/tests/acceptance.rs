//! Acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use nonmarkov::volterra::{series_solve_observed, trace_preservation_residual};
use nonmarkov::{
    certify_trajectory, certify_with, dual, expm_superop, f_closed_form, gksl, hs_inner, lidar_shabani,
    normalize_evolution, pauli, random, semigroup_solution, solve_master, solve_normalization,
    solve_semigroup_example, verify_resolvent, GkslSpec, KernelSpec64, LidarShabaniParams, Operator64,
    SolverConfig64, SuperOperator64, Thresholds, Trajectory64, Verdict,
};
use nonmarkov_cli::{sweep, RunOptions, SweepRange};
use num_complex::Complex;

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self { ok, detail: detail.into() }
    }
}

fn dephasing() -> SuperOperator64 {
    SuperOperator64::from_kraus(2, &[pauli::z()]).unwrap()
}

fn ls(gamma: f64) -> KernelSpec64 {
    lidar_shabani(&LidarShabaniParams::new(1.0, gamma, dephasing())).unwrap()
}

fn half_sigma_z() -> SuperOperator64 {
    gksl(&GkslSpec::hamiltonian_only(pauli::z::<f64>().scale(Complex::new(0.5, 0.0)))).unwrap()
}

fn sup_vs_expm(traj: &Trajectory64, l: &SuperOperator64) -> f64 {
    traj.times().iter().zip(traj.samples()).map(|(t, s)| (s - &expm_superop(l, *t)).norm()).fold(0.0, f64::max)
}

/// Master trajectories collected along the way for the invariant checks.
#[derive(Default)]
struct Collected {
    master: Vec<(String, Trajectory64)>,
}

fn closed_form_reproduction() -> Check {
    let l = SuperOperator64::zeros(2);
    let cfg = SolverConfig64::new(1e-3, 10.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let start = Instant::now();
        let n = solve_normalization(&l, &ls(gamma), &cfg).unwrap();
        let err = n
            .times()
            .iter()
            .zip(n.samples())
            .map(|(t, s)| (s.apply_unit().matrix()[(0, 0)].re - f_closed_form(1.0, gamma, *t).value).abs())
            .fold(0.0, f64::max);
        let elapsed = start.elapsed();
        ok &= err <= 1e-5 && elapsed <= Duration::from_secs(10);
        parts.push(format!("γ={gamma}: {err:.1e} in {:.2}s", elapsed.as_secs_f64()));
    }
    Check::new(ok, parts.join(", "))
}

fn cp_threshold() -> Check {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/sweep.toml");
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let range = SweepRange { gamma_min: Some(0.5), gamma_max: Some(1.5), steps: Some(21) };
    let (_, summary) = sweep(&config, out.path(), range, &RunOptions::default(), 1, false).unwrap();
    let elapsed = start.elapsed();
    let mut ok = summary.rows.len() == 21 && elapsed <= Duration::from_secs(180);
    let mut worst_cp = f64::INFINITY;
    for row in &summary.rows {
        // γ = 1 sits on the grid and belongs to the CP side
        let expected = if row.gamma < 1.0 - 1e-12 { "NOT_CP" } else { "CP" };
        ok &= row.verdict == expected;
        if expected == "CP" {
            worst_cp = worst_cp.min(row.min_choi_eigenvalue);
        }
    }
    ok &= worst_cp >= -1e-6;
    Check::new(
        ok,
        format!(
            "threshold estimate {:?}, min Choi eigenvalue on γ≥1 {worst_cp:.1e}, {:.2}s",
            summary.threshold_estimate,
            elapsed.as_secs_f64()
        ),
    )
}

fn theorem_realization(collected: &mut Collected) -> Check {
    let kernel = ls(1.5);
    let l = SuperOperator64::zeros(2);
    let cfg = SolverConfig64::new(1e-2, 5.0);
    let n = solve_normalization(&l, &kernel, &cfg).unwrap();
    let direct = solve_master(&l, &kernel, &cfg).unwrap();
    let mut worst = f64::INFINITY;
    let sol = series_solve_observed(&n, &kernel, 30, 1e-8, |_, iterate| {
        worst = worst.min(certify_trajectory(iterate, &Thresholds::default(), 1).global_min_choi_eigenvalue);
    });
    let check = match sol {
        Ok(sol) => {
            let gap = sol.trajectory.sup_distance(&direct).unwrap();
            Check::new(
                gap <= 5e-4 && sol.order <= 30 && worst >= -1e-6,
                format!("sup gap {gap:.1e}, {} iterations, min iterate Choi eigenvalue {worst:.1e}", sol.order),
            )
        }
        Err(e) => Check::new(false, format!("series did not converge: {e}")),
    };
    collected.master.push(("ls γ=1.5, dt=1e-2".into(), direct));
    check
}

fn semigroup_example() -> Check {
    let l = gksl(&GkslSpec::new(Operator64::zeros(2), vec![pauli::z()])).unwrap();
    let cfg = SolverConfig64::new(1e-4, 3.0);
    let v = solve_semigroup_example(&l, 1.0, &cfg).unwrap();
    let raw = v
        .times()
        .iter()
        .zip(v.samples())
        .map(|(t, s)| (s - &semigroup_solution(&l, 1.0, *t)).norm())
        .fold(0.0, f64::max);
    let normalized = sup_vs_expm(&normalize_evolution(&v, 1e-12).unwrap(), &l);
    Check::new(
        raw <= 1e-5 && normalized <= 1e-8,
        format!("V_t error {raw:.1e}, normalized error {normalized:.1e} (dt=1e-4)"),
    )
}

fn resolvent_identities(collected: &mut Collected) -> Check {
    let p_values = [2.0, 4.0, 8.0];
    let cases = [("unitary", half_sigma_z(), KernelSpec64::zero(2)), ("ls γ=1.5", SuperOperator64::zeros(2), ls(1.5))];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, l, kernel) in cases {
        let mut residuals = Vec::new();
        for dt in [1e-3, 5e-4] {
            let traj = solve_master(&l, &kernel, &SolverConfig64::new(dt, 30.0)).unwrap();
            let report = verify_resolvent(&traj, &l, &kernel, &p_values, 1e-3).unwrap();
            residuals.push(
                report
                    .entries
                    .iter()
                    .map(|e| [e.residual_direct, e.residual_right, e.residual_factored])
                    .collect::<Vec<_>>(),
            );
            if dt == 1e-3 {
                ok &= report.entries.len() == 3 && report.entries.iter().all(|e| e.error.is_none());
                collected.master.push((format!("{name}, dt={dt:e}"), traj));
            }
        }
        let coarse_max = residuals[0].iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
        let min_ratio = residuals[0]
            .iter()
            .flatten()
            .zip(residuals[1].iter().flatten())
            .map(|(c, f)| c / f)
            .fold(f64::INFINITY, f64::min);
        ok &= coarse_max <= 1e-3 && min_ratio >= 3.0;
        parts.push(format!("{name}: max residual {coarse_max:.1e}, min shrink {min_ratio:.2}×"));
    }
    Check::new(ok, parts.join("; "))
}

fn duality_and_invariants(collected: &mut Collected) -> Check {
    let mut rng = random::rng(2024);
    let mut worst_rel = 0.0f64;
    for i in 0..100 {
        let d = 1 + i % 4;
        let s: SuperOperator64 = random::superoperator(&mut rng, d);
        let a: Operator64 = random::operator(&mut rng, d);
        let b: Operator64 = random::operator(&mut rng, d);
        let lhs = hs_inner(&s.apply(&a).unwrap(), &b).unwrap();
        let rhs = hs_inner(&a, &s.adjoint().apply(&b).unwrap()).unwrap();
        let scale = s.norm() * a.frobenius_norm() * b.frobenius_norm();
        worst_rel = worst_rel.max((lhs - rhs).norm() / scale);
    }

    // one more trajectory with a generic generator and a non-commuting kernel channel
    let mut rng = random::rng(99);
    let h: Operator64 = random::hermitian(&mut rng, 3);
    let l = gksl(&GkslSpec::new(h, random::kraus_list(&mut rng, 3, 2))).unwrap();
    let channel: SuperOperator64 = random::unital_channel(&mut rng, 3, 3);
    let kernel = lidar_shabani(&LidarShabaniParams::new(1.0, 0.8, channel)).unwrap();
    let traj = solve_master(&l, &kernel, &SolverConfig64::new(1e-2, 5.0)).unwrap();
    collected.master.push(("random d=3, dt=1e-2".into(), traj));

    let mut ok = worst_rel <= 1e-12;
    let mut worst_ratio = 0.0f64;
    for (_, traj) in &collected.master {
        let bound = 10.0 * traj.dt() * traj.dt();
        let unital = traj.unitality_residuals().into_iter().fold(0.0, f64::max);
        let trace = dual(traj).samples().iter().map(trace_preservation_residual).fold(0.0, f64::max);
        ok &= unital <= bound && trace <= bound;
        worst_ratio = worst_ratio.max(unital.max(trace) / bound);
    }
    Check::new(
        ok,
        format!(
            "duality relative error {worst_rel:.1e}; {} trajectories, worst residual {worst_ratio:.1e}·10dt²",
            collected.master.len()
        ),
    )
}

fn property_suite() -> Check {
    let th = Thresholds::default();
    let sorted = |mut v: Vec<f64>| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let spectrum = |s: &SuperOperator64| sorted(Operator64::new(s.choi()).unwrap().hermitian_eigenvalues());
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    let identity_ok = close(&spectrum(&SuperOperator64::identity(2)), &[2.0, 0.0, 0.0, 0.0]);
    let transpose_ok = close(&spectrum(&SuperOperator64::transpose_map(2)), &[1.0, 1.0, 1.0, -1.0]);

    let mut rng = random::rng(17);
    let mut kraus_ok = true;
    for i in 0..100 {
        let d = 1 + i % 4;
        let kraus = random::kraus_list(&mut rng, d, 1 + i % 5);
        let s = SuperOperator64::from_kraus(d, &kraus).unwrap();
        kraus_ok &= certify_with(&s, &th).verdict == Verdict::Cp;
    }

    let l = half_sigma_z();
    let errors: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| sup_vs_expm(&solve_master(&l, &KernelSpec64::zero(2), &SolverConfig64::new(dt, 8.0)).unwrap(), &l))
        .collect();
    let min_ratio = errors.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);

    Check::new(
        identity_ok && transpose_ok && kraus_ok && min_ratio >= 3.5,
        format!(
            "identity spectrum {}, transpose spectrum {}, Kraus maps CP {}, error reduction per halving {min_ratio:.2}×",
            identity_ok, transpose_ok, kraus_ok
        ),
    )
}

fn main() {
    let suite = Instant::now();
    let mut collected = Collected::default();
    let mut results: Vec<(u8, &str, Check, Duration)> = Vec::new();
    let mut record = |n: u8, name: &'static str, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let check = f();
        results.push((n, name, check, start.elapsed()));
    };
    record(1, "closed-form reproduction", &mut closed_form_reproduction);
    record(2, "CP threshold sweep", &mut cp_threshold);
    record(3, "series vs direct solve", &mut || theorem_realization(&mut collected));
    record(4, "semigroup example", &mut semigroup_example);
    record(5, "resolvent identities", &mut || resolvent_identities(&mut collected));
    record(6, "duality and invariants", &mut || duality_and_invariants(&mut collected));
    let start = Instant::now();
    let mut check = property_suite();
    let total = suite.elapsed();
    check.ok &= total <= Duration::from_secs(300);
    check.detail.push_str(&format!("; acceptance total {:.1}s", total.as_secs_f64()));
    results.push((7, "property suite", check, start.elapsed()));

    let mut failed = 0;
    println!();
    for (n, name, check, elapsed) in &results {
        let status = if check.ok { "PASS" } else { "FAIL" };
        failed += usize::from(!check.ok);
        println!("criterion {n} {status} [{:.2}s] {name}: {}", elapsed.as_secs_f64(), check.detail);
    }
    println!();
    if failed > 0 {
        println!("acceptance: {failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria passed", results.len());
}
