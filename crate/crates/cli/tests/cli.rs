use std::path::{Path, PathBuf};
use std::process::Command;

use nonmarkov::{expm_superop, f_is_nonnegative, gksl, pauli, GkslSpec, Verdict};
use nonmarkov_cli::report::{CertificateReport, ResolventJson};
use nonmarkov_cli::{
    analytic_table, read_trajectory, run, sweep, verify, write_trajectory, CliError, Outcome, RunOptions, Scenario,
    SweepRange,
};
use num_complex::Complex;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const LS_TEMPLATE: &str = r#"
name = "ls"
dim = 2

[kernel]
type = "lidar_shabani"
kappa = 1.0
gamma = GAMMA
channel_kraus = [{ re = [[1.0, 0.0], [0.0, -1.0]] }]

[equation]
type = "normalization"

[solver]
dt = 1e-2
t_max = 20.0

[outputs]
trajectory = false
"#;

#[test]
fn gamma_two_runs_clean_and_certifies_cp() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&bundled("ls_gamma2"), dir.path(), &RunOptions::default(), 1, true).unwrap();
    assert_eq!(summary.outcome, Outcome::Success);
    assert_eq!(summary.verdict, Some(Verdict::Cp));
    let cert: CertificateReport = read_json(&dir.path().join("certificate.json"));
    assert!(cert.all_cp);
    assert_eq!(cert.samples.len(), 10_001);
    assert!(cert.first_not_cp_time.is_none());
}

#[test]
fn gamma_half_with_require_cp_reports_first_failure() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&bundled("ls_gamma_half"), dir.path(), &RunOptions::default(), 1, true).unwrap();
    assert_eq!(summary.outcome, Outcome::NotCp);
    assert_eq!(summary.outcome.exit_code(), 2);
    let cert: CertificateReport = read_json(&dir.path().join("certificate.json"));
    let t = cert.first_not_cp_time.unwrap();
    let (_, zero) = f_is_nonnegative(1.0, 0.5, 10.0, 10_000);
    assert!((t - zero.unwrap()).abs() <= 2e-3, "{t} vs {zero:?}");
    // without the flag the same scenario is a success
    let summary = run(&bundled("ls_gamma_half"), dir.path(), &RunOptions::default(), 10, false).unwrap();
    assert_eq!(summary.outcome, Outcome::Success);
}

#[test]
fn unitary_scenario_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&bundled("unitary"), dir.path(), &RunOptions::default(), 100, false).unwrap();
    assert_eq!(summary.resolvent_pass, Some(true));
    let traj = read_trajectory(&dir.path().join("trajectory.csv")).unwrap();
    let l = gksl(&GkslSpec::hamiltonian_only(pauli::z::<f64>().scale(Complex::new(0.25, 0.0)))).unwrap();
    for (t, s) in traj.times().iter().zip(traj.samples()) {
        assert!((s - &expm_superop(&l, *t)).norm() <= 1e-6, "t = {t}");
    }
    let report: ResolventJson = read_json(&dir.path().join("resolvent.json"));
    assert!(report.pass);
    assert_eq!(report.entries.len(), 3);
}

#[test]
fn trajectory_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
name = "rt"
dim = 3
hamiltonian = { re = [[0.3, 0.1, 0.0], [0.1, -0.2, 0.4], [0.0, 0.4, 0.05]], im = [[0.0, 0.2, -0.1], [-0.2, 0.0, 0.3], [0.1, -0.3, 0.0]] }

[[kraus]]
re = [[0.0, 0.5, 0.0], [0.0, 0.0, 0.2], [0.1, 0.0, 0.0]]
im = [[0.1, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, -0.2]]

[kernel]
type = "lidar_shabani"
kappa = 0.8
gamma = 0.6
random_channel = { terms = 2 }

[equation]
type = "master"

[solver]
dt = 0.01
t_max = 1.0
"#;
    let config = write_config(dir.path(), "rt", text);
    let scenario = Scenario::load(&config).unwrap();
    let solved = scenario.solve(None, &RunOptions { seed: 9, allow_large: false }).unwrap();
    let path = dir.path().join("traj.csv");
    write_trajectory(&path, &solved.trajectory, 1).unwrap();
    let back = read_trajectory(&path).unwrap();
    assert_eq!(back, solved.trajectory);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run(&bundled("semigroup"), out, &RunOptions::default(), 1, false).unwrap();
    }
    for file in ["trajectory.csv", "certificate.json", "resolvent.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_selects_the_random_channel() {
    let dir = tempfile::tempdir().unwrap();
    let text = LS_TEMPLATE
        .replace("GAMMA", "1.2")
        .replace("channel_kraus = [{ re = [[1.0, 0.0], [0.0, -1.0]] }]", "random_channel = {}")
        .replace("type = \"normalization\"", "type = \"master\"")
        .replace("t_max = 20.0", "t_max = 1.0");
    let scenario = Scenario::load(&write_config(dir.path(), "seeded", &text)).unwrap();
    let solve = |seed| scenario.solve(None, &RunOptions { seed, allow_large: false }).unwrap().trajectory;
    assert_eq!(solve(1), solve(1));
    assert_ne!(solve(1), solve(2));
}

#[test]
fn sweep_locates_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ls", &LS_TEMPLATE.replace("GAMMA", "1.0"));
    let opts = RunOptions::default();
    let range = SweepRange { gamma_min: Some(0.5), gamma_max: Some(1.5), steps: Some(11) };
    let (outcome, summary) = sweep(&config, &dir.path().join("a"), range, &opts, 1, true).unwrap();
    assert_eq!(outcome, Outcome::NotCp);
    let estimate = summary.threshold_estimate.unwrap();
    assert!((estimate - 1.0).abs() <= 0.1, "{estimate}");
    let csv = std::fs::read_to_string(dir.path().join("a/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.starts_with("gamma,min_choi_eigenvalue,verdict,first_not_cp_time"));

    let range = SweepRange { gamma_min: Some(1.1), gamma_max: Some(2.0), steps: Some(5) };
    let (outcome, summary) = sweep(&config, &dir.path().join("b"), range, &opts, 1, true).unwrap();
    assert_eq!(outcome, Outcome::Success);
    assert!(summary.rows.iter().all(|r| r.verdict == "CP"));
    assert!(summary.threshold_estimate.is_none());

    let range = SweepRange { gamma_min: Some(0.1), gamma_max: Some(0.9), steps: Some(5) };
    let (_, summary) = sweep(&config, &dir.path().join("c"), range, &opts, 1, false).unwrap();
    assert!(summary.rows.iter().all(|r| r.verdict == "NOT_CP" && r.first_not_cp_time.is_some()));

    let range = SweepRange { steps: Some(2), ..Default::default() };
    assert!(matches!(sweep(&config, &dir.path().join("d"), range, &opts, 1, false), Err(CliError::Invalid(_))));
}

#[test]
fn analytic_table_examples() {
    let dir = tempfile::tempdir().unwrap();
    let rows = analytic_table(1.0, 1.0, 2.0, 3, &dir.path().join("t.csv")).unwrap();
    assert_eq!(rows[0], (0.0, 1.0, "critical"));
    assert!((rows[1].1 - 0.735_759).abs() < 1e-6);
    assert!((rows[2].1 - 0.406_006).abs() < 1e-6);
    let rows = analytic_table(2.0, 0.0, 5.0, 51, &dir.path().join("cos.csv")).unwrap();
    for (t, f, branch) in rows {
        assert_eq!(branch, "under");
        assert!((f - (2.0 * t).cos()).abs() < 1e-12);
    }
    assert!(analytic_table(1.0, 1.0, 2.0, 1, &dir.path().join("x.csv")).is_err());
}

#[test]
fn verify_resolvent_from_saved_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
name = "u"
dim = 2
hamiltonian = { re = [[0.5, 0.0], [0.0, -0.5]] }

[equation]
type = "master"

[solver]
dt = 1e-3
t_max = 12.0
"#;
    let config = write_config(dir.path(), "u", text);
    run(&config, dir.path(), &RunOptions::default(), 1, false).unwrap();
    let saved = dir.path().join("trajectory.csv");
    let (outcome, report) =
        verify(&config, Some(&saved), Some(vec![2.0, 4.0]), Some(1e-4), dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(outcome, Outcome::Success, "{report:?}");

    // negative control: the same trajectory against a different generator
    let wrong = write_config(dir.path(), "w", &text.replace("0.5, 0.0], [0.0, -0.5", "0.7, 0.0], [0.0, -0.7"));
    let (outcome, report) =
        verify(&wrong, Some(&saved), Some(vec![2.0, 4.0]), Some(1e-4), dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(outcome, Outcome::CheckFailed);
    assert!(report.entries.iter().all(|e| e.residual_direct.unwrap() > 1e-2));
}

#[test]
fn config_errors_carry_location_and_context() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write_config(dir.path(), "broken", "name = \"x\"\ndim = 2\n[solver]\ndt = \n");
    let err = Scenario::load(&broken).unwrap_err();
    assert!(matches!(err, CliError::Config { .. }));
    assert!(err.to_string().contains("line 4"), "{err}");

    let shape = write_config(
        dir.path(),
        "shape",
        "name = \"s\"\ndim = 2\nhamiltonian = { re = [[1.0]] }\n[equation]\ntype = \"master\"\n[solver]\ndt = 0.1\nt_max = 1.0\n",
    );
    let err = run(&shape, dir.path(), &RunOptions::default(), 1, false).unwrap_err();
    assert!(err.to_string().contains("hamiltonian must be 2×2"), "{err}");

    let large = write_config(
        dir.path(),
        "large",
        "name = \"big\"\ndim = 9\n[equation]\ntype = \"master\"\n[solver]\ndt = 0.5\nt_max = 1.0\n[outputs]\ntrajectory = false\ncertificate = false\n",
    );
    let err = run(&large, dir.path(), &RunOptions::default(), 1, false).unwrap_err();
    assert!(err.to_string().contains("big"), "{err}");
    run(&large, dir.path(), &RunOptions { seed: 0, allow_large: true }, 1, false).unwrap();

    let not_cp = write_config(
        dir.path(),
        "notcp",
        &LS_TEMPLATE.replace("GAMMA", "1.0").replace("[[1.0, 0.0], [0.0, -1.0]]", "[[1.0, 0.0], [0.0, 0.5]]"),
    );
    let err = run(&not_cp, dir.path(), &RunOptions::default(), 1, false).unwrap_err();
    assert!(matches!(err, CliError::Library { .. }), "{err}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_nonmarkov");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let out = dir.path().join("ok");
    let o = status(&["run", "--config", bundled("ls_gamma2").to_str().unwrap(), "--out", out.to_str().unwrap(), "--require-cp", "--stride", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trajectory.csv").exists());

    let out = dir.path().join("half");
    let o = status(&["run", "--config", bundled("ls_gamma_half").to_str().unwrap(), "--out", out.to_str().unwrap(), "--require-cp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("first NOT_CP time"));

    let o = status(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let table = dir.path().join("table.csv");
    let o = status(&["analytic-table", "--gamma", "0.5", "--t-max", "4", "--points", "9", "--out", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), 10);

    let o = status(&["verify-resolvent", "--config", bundled("semigroup").to_str().unwrap(), "--out", dir.path().join("vr").to_str().unwrap(), "--p-values", "4,8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
