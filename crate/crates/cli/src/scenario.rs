//! Scenario files.
//!
//! ```toml
//! name = "ls_gamma2"
//! dim = 2
//! # hamiltonian = { re = [[0.5, 0.0], [0.0, -0.5]] }
//! # [[kraus]]
//! # re = [[1.0, 0.0], [0.0, -1.0]]
//!
//! [kernel]
//! type = "lidar_shabani"          # or "none", "table"
//! kappa = 1.0
//! gamma = 2.0
//! channel_kraus = [{ re = [[1.0, 0.0], [0.0, -1.0]] }]
//!
//! [equation]
//! type = "normalization"          # master | normalization | modified | semigroup_example
//!
//! [solver]
//! dt = 1e-3
//! t_max = 10.0
//!
//! [outputs]
//! resolvent_check = { p_values = [2.0, 4.0] }
//! ```

use std::path::{Path, PathBuf};

use nonmarkov::random;
use nonmarkov::volterra::HistoryQuadrature;
use nonmarkov::{
    gksl, lidar_shabani, normalize_evolution, solve_master, solve_modified, solve_normalization,
    solve_semigroup_example, CpFamily, GkslSpec, KernelSpec64, LidarShabaniParams, Operator64, ScalarKernel,
    SolverConfig64, SuperOperator64, Trajectory64,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Matrix as explicit real and (optional) imaginary nested arrays, row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_operator(&self) -> nonmarkov::Result<Operator64> {
        Operator64::from_parts(&self.re, self.im.as_deref())
    }
}

/// Random unital channel drawn from the `--seed` stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomChannel {
    /// Number of unitary terms in the mixture.
    #[serde(default = "default_terms")]
    pub terms: usize,
}

fn default_terms() -> usize {
    3
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    #[default]
    None,
    LidarShabani {
        kappa: f64,
        gamma: f64,
        #[serde(default)]
        channel_kraus: Vec<MatrixSpec>,
        #[serde(default)]
        random_channel: Option<RandomChannel>,
    },
    /// `B_t = k(t)·B` with `k` linearly interpolated from a table.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        channel_kraus: Vec<MatrixSpec>,
        #[serde(default)]
        random_channel: Option<RandomChannel>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EquationConfig {
    Master,
    Normalization,
    /// `P` is the CP map built from `kraus`; `B_t` is the kernel's CP part.
    Modified {
        #[serde(default)]
        normalize: bool,
    },
    SemigroupExample {
        lambda: f64,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_correctors")]
    pub corrector_iterations: usize,
}

fn default_correctors() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventCheck {
    pub p_values: Vec<f64>,
    #[serde(default = "default_resolvent_tol")]
    pub tol: f64,
}

fn default_resolvent_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "yes")]
    pub trajectory: bool,
    /// Write every n-th sample to `trajectory.csv`.
    #[serde(default = "one")]
    pub trajectory_stride: usize,
    #[serde(default = "yes")]
    pub certificate: bool,
    #[serde(default)]
    pub resolvent_check: Option<ResolventCheck>,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self { trajectory: true, trajectory_stride: 1, certificate: true, resolvent_check: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub hamiltonian: Option<MatrixSpec>,
    #[serde(default)]
    pub kraus: Vec<MatrixSpec>,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub equation: EquationConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// Command-line settings that apply to every scenario.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub seed: u64,
    pub allow_large: bool,
}

/// Everything a solve needs, resolved from a [`Scenario`].
#[derive(Clone, Debug)]
pub struct Problem {
    /// `L` for master, normalization and the semigroup example; `P` for the modified equation.
    pub generator: SuperOperator64,
    pub kernel: KernelSpec64,
    pub config: SolverConfig64,
}

/// Output of [`Scenario::solve`].
#[derive(Clone, Debug)]
pub struct Solved {
    pub problem: Problem,
    pub trajectory: Trajectory64,
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| CliError::Config { path: origin.to_path_buf(), message: e.to_string() })?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    fn invalid(&self, message: impl Into<String>) -> CliError {
        CliError::Config { path: PathBuf::from(&self.name), message: message.into() }
    }

    fn lib<T>(&self, r: nonmarkov::Result<T>) -> Result<T> {
        r.map_err(|e| CliError::library(&self.name, e))
    }

    /// Structural checks that do not need any linear algebra.
    pub fn validate(&self, opts: &RunOptions) -> Result<()> {
        self.lib(nonmarkov::operator::check_dim(self.dim, opts.allow_large))?;
        if self.dim == 0 {
            return Err(self.invalid("dim must be at least 1"));
        }
        let square = |m: &MatrixSpec, what: &str| -> Result<()> {
            let ok = |rows: &Vec<Vec<f64>>| rows.len() == self.dim && rows.iter().all(|r| r.len() == self.dim);
            if !ok(&m.re) || m.im.as_ref().is_some_and(|im| !ok(im)) {
                return Err(self.invalid(format!("{what} must be {d}×{d}", d = self.dim)));
            }
            Ok(())
        };
        if let Some(h) = &self.hamiltonian {
            square(h, "hamiltonian")?;
        }
        for (i, k) in self.kraus.iter().enumerate() {
            square(k, &format!("kraus[{i}]"))?;
        }
        match &self.kernel {
            KernelConfig::None => {}
            KernelConfig::LidarShabani { channel_kraus, random_channel, .. }
            | KernelConfig::Table { channel_kraus, random_channel, .. } => {
                if channel_kraus.is_empty() == random_channel.is_none() {
                    return Err(self.invalid("kernel needs exactly one of channel_kraus or random_channel"));
                }
                for (i, k) in channel_kraus.iter().enumerate() {
                    square(k, &format!("kernel.channel_kraus[{i}]"))?;
                }
            }
        }
        match &self.equation {
            EquationConfig::Modified { .. } if self.hamiltonian.is_some() => {
                return Err(self.invalid("the modified equation takes P from kraus only; remove hamiltonian"));
            }
            EquationConfig::SemigroupExample { .. } if self.kernel != KernelConfig::None => {
                return Err(self.invalid("semigroup_example builds its own kernel; set kernel type to none"));
            }
            _ => {}
        }
        if let Some(check) = &self.outputs.resolvent_check {
            if matches!(self.equation, EquationConfig::Normalization) {
                return Err(self.invalid("resolvent_check is not available for the normalization equation"));
            }
            if check.p_values.is_empty() || check.p_values.iter().any(|p| !(*p > 0.0)) {
                return Err(self.invalid("resolvent_check.p_values must be non-empty and positive"));
            }
        }
        if self.outputs.trajectory_stride == 0 {
            return Err(self.invalid("outputs.trajectory_stride must be at least 1"));
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> Result<Operator64> {
        match &self.hamiltonian {
            Some(h) => self.lib(h.to_operator()),
            None => Ok(Operator64::zeros(self.dim)),
        }
    }

    pub fn kraus_operators(&self) -> Result<Vec<Operator64>> {
        self.kraus.iter().map(|k| self.lib(k.to_operator())).collect()
    }

    fn channel(&self, kraus: &[MatrixSpec], random_channel: &Option<RandomChannel>, seed: u64) -> Result<SuperOperator64> {
        match random_channel {
            Some(rc) => {
                let mut rng = random::rng(seed);
                Ok(random::unital_channel(&mut rng, self.dim, rc.terms))
            }
            None => {
                let ops: Vec<Operator64> = kraus.iter().map(|k| self.lib(k.to_operator())).collect::<Result<_>>()?;
                self.lib(SuperOperator64::from_kraus(self.dim, &ops))
            }
        }
    }

    /// Kernel with `gamma` replacing the configured Lidar–Shabani damping when given.
    pub fn kernel(&self, gamma: Option<f64>, seed: u64) -> Result<KernelSpec64> {
        match &self.kernel {
            KernelConfig::None => {
                if gamma.is_some() {
                    return Err(self.invalid("a gamma sweep needs a lidar_shabani kernel"));
                }
                Ok(KernelSpec64::zero(self.dim))
            }
            KernelConfig::LidarShabani { kappa, gamma: g, channel_kraus, random_channel } => {
                let channel = self.channel(channel_kraus, random_channel, seed)?;
                let params = LidarShabaniParams::new(*kappa, gamma.unwrap_or(*g), channel);
                self.lib(lidar_shabani(&params))
            }
            KernelConfig::Table { times, values, channel_kraus, random_channel } => {
                if gamma.is_some() {
                    return Err(self.invalid("a gamma sweep needs a lidar_shabani kernel"));
                }
                let channel = self.channel(channel_kraus, random_channel, seed)?;
                let k = self.lib(ScalarKernel::table(times.clone(), values.clone()))?;
                Ok(KernelSpec64::new(self.lib(CpFamily::scaled(k, channel))?))
            }
        }
    }

    pub fn solver_config(&self, opts: &RunOptions) -> SolverConfig64 {
        SolverConfig64 {
            dt: self.solver.dt,
            t_max: self.solver.t_max,
            corrector_iterations: self.solver.corrector_iterations,
            history_quadrature: HistoryQuadrature::Trapezoid,
            allow_large: opts.allow_large,
        }
    }

    pub fn problem(&self, gamma: Option<f64>, opts: &RunOptions) -> Result<Problem> {
        self.validate(opts)?;
        let config = self.solver_config(opts);
        let kraus = self.kraus_operators()?;
        let (generator, kernel) = match &self.equation {
            EquationConfig::Modified { .. } => {
                let p = self.lib(SuperOperator64::from_kraus(self.dim, &kraus))?;
                (p, self.kernel(gamma, opts.seed)?)
            }
            EquationConfig::SemigroupExample { lambda, .. } => {
                let l = self.lib(gksl(&GkslSpec::new(self.hamiltonian()?, kraus)))?;
                let family = CpFamily::Semigroup { weight: lambda * lambda, generator: l.clone() };
                (l, KernelSpec64::new(family))
            }
            _ => {
                let l = self.lib(gksl(&GkslSpec::new(self.hamiltonian()?, kraus)))?;
                (l, self.kernel(gamma, opts.seed)?)
            }
        };
        Ok(Problem { generator, kernel, config })
    }

    pub fn solve(&self, gamma: Option<f64>, opts: &RunOptions) -> Result<Solved> {
        let problem = self.problem(gamma, opts)?;
        let (l, kernel, cfg) = (&problem.generator, &problem.kernel, &problem.config);
        let trajectory = match &self.equation {
            EquationConfig::Master => self.lib(solve_master(l, kernel, cfg))?,
            EquationConfig::Normalization => self.lib(solve_normalization(l, kernel, cfg))?,
            EquationConfig::Modified { normalize } => {
                let v = self.lib(solve_modified(l, &kernel.cp_part, cfg))?;
                self.maybe_normalize(v, *normalize)?
            }
            EquationConfig::SemigroupExample { lambda, normalize } => {
                let v = self.lib(solve_semigroup_example(l, *lambda, cfg))?;
                self.maybe_normalize(v, *normalize)?
            }
        };
        Ok(Solved { problem, trajectory })
    }

    fn maybe_normalize(&self, v: Trajectory64, normalize: bool) -> Result<Trajectory64> {
        if normalize {
            self.lib(normalize_evolution(&v, 1e-8))
        } else {
            Ok(v)
        }
    }

    /// Whether the resolvent check compares against `P` and `B_t` rather than `L` and `L_t`.
    pub fn is_modified_form(&self) -> bool {
        matches!(self.equation, EquationConfig::Modified { .. } | EquationConfig::SemigroupExample { .. })
    }

    pub fn is_normalized_output(&self) -> bool {
        matches!(
            self.equation,
            EquationConfig::Modified { normalize: true } | EquationConfig::SemigroupExample { normalize: true, .. }
        )
    }
}
