use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nonmarkov_cli::{analytic_table, run, sweep, verify, Outcome, RunOptions, SweepRange};

#[derive(Parser, Debug)]
#[command(name = "nonmarkov", version, about = "Memory-kernel master equations: solve, certify, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for random channels.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allow dimensions above 8.
    #[arg(long)]
    allow_large: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions { seed: self.seed, allow_large: self.allow_large }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and write trajectory, certificate and resolvent reports.
    Run {
        #[command(flatten)]
        common: Common,
        /// Exit with status 2 if any certified sample is NOT_CP.
        #[arg(long)]
        require_cp: bool,
        /// Certify every n-th sample (the last one always).
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Solve a Lidar-Shabani scenario over a grid of gamma values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        require_cp: bool,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        gamma_min: Option<f64>,
        #[arg(long)]
        gamma_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Tabulate the closed-form f(t) of the exponential kernel.
    AnalyticTable {
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Output CSV file.
        #[arg(long, default_value = "analytic_table.csv")]
        out: PathBuf,
    },
    /// Check the Laplace-domain resolvent identities for a scenario.
    VerifyResolvent {
        #[command(flatten)]
        common: Common,
        /// Previously written trajectory.csv; solved afresh when omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn dispatch(cli: Cli) -> nonmarkov_cli::Result<Outcome> {
    match cli.command {
        Command::Run { common, require_cp, stride } => {
            let summary = run(&common.config, &common.out, &common.options(), stride, require_cp)?;
            if let Some(v) = summary.verdict {
                println!("verdict: {}", v.as_str());
            }
            if let Some(t) = summary.first_not_cp_time {
                println!("first NOT_CP time: {t}");
            }
            if let Some(pass) = summary.resolvent_pass {
                println!("resolvent check: {}", if pass { "PASS" } else { "FAIL" });
            }
            for path in &summary.written {
                println!("wrote {}", path.display());
            }
            Ok(summary.outcome)
        }
        Command::Sweep { common, require_cp, stride, gamma_min, gamma_max, steps } => {
            let range = SweepRange { gamma_min, gamma_max, steps };
            let (outcome, summary) = sweep(&common.config, &common.out, range, &common.options(), stride, require_cp)?;
            for row in &summary.rows {
                println!("gamma {:.6}  min choi {:+.3e}  {}", row.gamma, row.min_choi_eigenvalue, row.verdict);
            }
            match summary.threshold_estimate {
                Some(g) => println!("threshold estimate: {g}"),
                None => println!("threshold estimate: none (no NOT_CP to CP transition)"),
            }
            Ok(outcome)
        }
        Command::AnalyticTable { kappa, gamma, t_max, points, out } => {
            analytic_table(kappa, gamma, t_max, points, &out)?;
            println!("wrote {}", out.display());
            Ok(Outcome::Success)
        }
        Command::VerifyResolvent { common, trajectory, p_values, tol } => {
            let (outcome, json) =
                verify(&common.config, trajectory.as_deref(), p_values, tol, &common.out, &common.options())?;
            for e in &json.entries {
                match &e.error {
                    Some(err) => println!("p = {}: {err}", e.p),
                    None => println!(
                        "p = {}: direct {:.3e} right {:.3e} factored {:.3e} {}",
                        e.p,
                        e.residual_direct.unwrap_or(f64::NAN),
                        e.residual_right.unwrap_or(f64::NAN),
                        e.residual_factored.unwrap_or(f64::NAN),
                        if e.pass { "PASS" } else { "FAIL" }
                    ),
                }
            }
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
