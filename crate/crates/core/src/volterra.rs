//! Time-domain integration of memory master equations.
//!
//! All solvers share one scheme on a uniform grid `t_n = n·dt`:
//!
//! * the history integral `∫₀^{t_n} K_{t_n−s} A_s ds` is the composite
//!   trapezoid rule over the grid, its `s = 0` end using `A_0 = id`;
//! * each step is an explicit Euler predictor followed by a fixed number of
//!   corrections of the implicit trapezoidal rule.
//!
//! The scheme is second order. When the kernel factors as `k(t)·M` with an
//! exponential `k`, the trapezoid sum is updated recursively instead of being
//! re-summed; the discrete scheme is the same.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::generators::{CpFamily, KernelSpec, ScalarKernel};
use crate::operator::{certify_with, check_dim, CpCertificate, Operator, SuperOperator, Thresholds, Verdict};
use crate::scalar::{all_finite, axpy, cplx, modulus, real, to_f64, CMatrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrajectoryKind {
    /// `A_t` of the memory master equation.
    Master,
    /// `A_t` from the right-multiplied form `dA/dt = A L + ∫ A_s L_{t−s} ds`.
    MasterRight,
    /// `N_t` of the normalization equation.
    Normalization,
    /// `A_t` assembled from the series `A = N + N ⋆ B ⋆ A`.
    Series,
    /// `V_t` of the modified equation.
    Modified,
    /// `V_t(1)^{−1/2} V_t(·) V_t(1)^{−1/2}`.
    Normalized,
    /// Built or loaded by the caller.
    External,
}

impl TrajectoryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Master => "master",
            Self::MasterRight => "master_right",
            Self::Normalization => "normalization",
            Self::Series => "series",
            Self::Modified => "modified",
            Self::Normalized => "normalized",
            Self::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "master" => Self::Master,
            "master_right" => Self::MasterRight,
            "normalization" => Self::Normalization,
            "series" => Self::Series,
            "modified" => Self::Modified,
            "normalized" => Self::Normalized,
            "external" => Self::External,
            _ => return None,
        })
    }
}

/// Superoperator samples on a uniform grid starting at `t = 0` with `A_0 = id`.
///
/// `dual` marks the Schrödinger-picture (Hilbert–Schmidt adjoint) version.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    dim: usize,
    dt: T,
    times: Vec<T>,
    samples: Vec<SuperOperator<T>>,
    kind: TrajectoryKind,
    dual: bool,
}

impl<T: Real> Trajectory<T> {
    /// Validates the grid and the initial sample.
    pub fn new(times: Vec<T>, samples: Vec<SuperOperator<T>>, kind: TrajectoryKind, dual: bool) -> Result<Self> {
        if times.is_empty() || times.len() != samples.len() {
            return Err(Error::InvalidParameter("trajectory needs one sample per time".into()));
        }
        if times[0] != T::zero() {
            return Err(Error::InvalidParameter("trajectory must start at t = 0".into()));
        }
        let dim = samples[0].dim();
        if let Some(s) = samples.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
        }
        if samples[0] != SuperOperator::identity(dim) {
            return Err(Error::InvalidParameter("first sample must be the identity map".into()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { T::one() };
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter("times must increase".into()));
        }
        let rel = real::<T>(1e-12).max(T::default_epsilon() * real(8.0));
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > rel * dt.max(w[1]) {
                return Err(Error::InvalidParameter("time grid is not uniform".into()));
            }
        }
        Ok(Self { dim, dt, times, samples, kind, dual })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn samples(&self) -> &[SuperOperator<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    pub fn t_max(&self) -> T {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn last(&self) -> &SuperOperator<T> {
        self.samples.last().expect("non-empty trajectory")
    }

    pub fn with_kind(mut self, kind: TrajectoryKind) -> Self {
        self.kind = kind;
        self
    }

    /// `‖A_t(1) − 1‖` per sample.
    pub fn unitality_residuals(&self) -> Vec<T> {
        let id = Operator::identity(self.dim);
        self.samples.iter().map(|s| (&s.apply_unit() - &id).norm()).collect()
    }

    /// `max_ij |tr(A_t E_ij) − tr(E_ij)|` per sample.
    pub fn trace_residuals(&self) -> Vec<T> {
        self.samples.iter().map(trace_preservation_residual).collect()
    }

    /// `sup_t ‖A_t − B_t‖` on a shared grid.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() || self.dim != other.dim || (self.dt - other.dt).abs() > self.dt * real(1e-12) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), |m, x| if x > m { x } else { m }))
    }

    /// Every `factor`-th sample (`factor ≥ 1`), keeping the grid uniform.
    pub fn subsample(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let times = self.times.iter().step_by(factor).copied().collect();
        let samples = self.samples.iter().step_by(factor).cloned().collect();
        Self { dim: self.dim, dt: self.dt * T::from_usize(factor).unwrap(), times, samples, kind: self.kind, dual: self.dual }
    }
}

/// `max_ij |tr(S E_ij) − δ_ij|`: zero exactly when `S` preserves the trace.
pub fn trace_preservation_residual<T: Real>(s: &SuperOperator<T>) -> T {
    let d = s.dim();
    let m = s.matrix();
    let mut worst = T::zero();
    for col in 0..d * d {
        let mut tr = Complex::new(T::zero(), T::zero());
        for k in 0..d {
            tr += m[(k + k * d, col)];
        }
        let expected = if col % d == col / d { T::one() } else { T::zero() };
        let r = modulus(tr - cplx(expected));
        if r > worst {
            worst = r;
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistoryQuadrature {
    Trapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub dt: T,
    pub t_max: T,
    pub corrector_iterations: usize,
    pub history_quadrature: HistoryQuadrature,
    /// Permit `d > 8`.
    pub allow_large: bool,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(dt: T, t_max: T) -> Self {
        Self { dt, t_max, corrector_iterations: 2, history_quadrature: HistoryQuadrature::Trapezoid, allow_large: false }
    }

    pub fn with_correctors(mut self, n: usize) -> Self {
        self.corrector_iterations = n;
        self
    }

    /// Number of steps `t_max / dt`, which must be integral up to rounding.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {:e}", self.dt)));
        }
        if !(self.t_max > T::zero()) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {:e}", self.t_max)));
        }
        if self.corrector_iterations == 0 {
            return Err(Error::InvalidParameter("corrector_iterations must be at least 1".into()));
        }
        let ratio = self.t_max / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > real::<T>(1e-6).max(ratio * T::default_epsilon() * real(16.0)) {
            return Err(Error::InvalidParameter(format!(
                "t_max / dt = {:e} is not an integer",
                ratio
            )));
        }
        n.to_usize().filter(|&n| n > 0).ok_or_else(|| Error::InvalidParameter("no time steps".into()))
    }

    fn time(&self, n: usize) -> T {
        T::from_usize(n).unwrap() * self.dt
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    /// `K·A`
    Left,
    /// `A·K`
    Right,
}

#[inline]
fn side_mul<T: Real>(side: Side, k: &CMatrix<T>, a: &CMatrix<T>) -> CMatrix<T> {
    match side {
        Side::Left => k * a,
        Side::Right => a * k,
    }
}

#[inline]
fn side_gemm<T: Real>(side: Side, acc: &mut CMatrix<T>, alpha: Complex<T>, k: &CMatrix<T>, a: &CMatrix<T>) {
    let one = cplx(T::one());
    match side {
        Side::Left => acc.gemm(alpha, k, a, one),
        Side::Right => acc.gemm(alpha, a, k, one),
    }
}

/// Kernel samples `K_m = K(m·dt)` in the form the history sum needs.
enum History<T: Real> {
    Zero,
    /// `K_t = Σ_terms w(t) M`.
    Separable(Vec<SeparableTerm<T>>),
    Dense(Vec<CMatrix<T>>),
}

enum SeparableTerm<T: Real> {
    /// `w(t) = amplitude·e^{−rate t}`; `acc` holds `½q^n A_0 + Σ_{j=1}^n q^{n−j} A_j`, `q = e^{−rate·dt}`.
    Exponential { amplitude: T, q: T, map: CMatrix<T>, acc: CMatrix<T> },
    Sampled { weights: Vec<T>, map: CMatrix<T> },
    /// `K_m = weight·E^m`; `acc` holds `½E^n A_0 + Σ_{j=1}^n E^{n−j} A_j` (factors on the multiplying side).
    Propagated { weight: T, step: CMatrix<T>, acc: CMatrix<T>, horizon: T },
}

impl<T: Real> History<T> {
    fn separable(kernel: &ScalarKernel<T>, map: CMatrix<T>, cfg: &SolverConfig<T>, steps: usize) -> Self {
        let m = map.nrows();
        let term = match kernel {
            ScalarKernel::Exponential { amplitude, rate } => SeparableTerm::Exponential {
                amplitude: *amplitude,
                q: (-*rate * cfg.dt).exp(),
                map,
                acc: CMatrix::identity(m, m) * cplx(real::<T>(0.5)),
            },
            _ => SeparableTerm::Sampled { weights: (0..=steps).map(|n| kernel.eval(cfg.time(n))).collect(), map },
        };
        History::Separable(vec![term])
    }

    /// `K_0`.
    fn at_zero(&self, m: usize) -> CMatrix<T> {
        match self {
            History::Zero => CMatrix::zeros(m, m),
            History::Dense(k) => k[0].clone(),
            History::Separable(terms) => {
                let mut out = CMatrix::zeros(m, m);
                for term in terms {
                    match term {
                        SeparableTerm::Exponential { amplitude, map, .. } => out += map * cplx(*amplitude),
                        SeparableTerm::Sampled { weights, map } => out += map * cplx(weights[0]),
                        SeparableTerm::Propagated { weight, .. } => out += CMatrix::identity(m, m) * cplx(*weight),
                    }
                }
                out
            }
        }
    }

    /// `dt·[½K_{n}A_0 + Σ_{j=1}^{n−1} K_{n−j}A_j]` for `n = a.len()`.
    fn known_part(&self, a: &[CMatrix<T>], side: Side, dt: T) -> CMatrix<T> {
        let n = a.len();
        let m = a[0].nrows();
        let half = cplx(real::<T>(0.5));
        match self {
            History::Zero => CMatrix::zeros(m, m),
            History::Dense(k) => {
                let mut acc = CMatrix::zeros(m, m);
                side_gemm(side, &mut acc, half, &k[n], &a[0]);
                let one = cplx(T::one());
                for j in 1..n {
                    side_gemm(side, &mut acc, one, &k[n - j], &a[j]);
                }
                acc * cplx(dt)
            }
            History::Separable(terms) => {
                let mut out = CMatrix::zeros(m, m);
                for term in terms {
                    match term {
                        SeparableTerm::Exponential { amplitude, q, map, acc } => {
                            let s = acc * cplx(*amplitude * *q * dt);
                            out += side_mul(side, map, &s);
                        }
                        SeparableTerm::Sampled { weights, map } => {
                            let mut s = &a[0] * cplx(weights[n] * real(0.5));
                            for j in 1..n {
                                axpy(&mut s, cplx(weights[n - j]), &a[j]);
                            }
                            s *= cplx(dt);
                            out += side_mul(side, map, &s);
                        }
                        SeparableTerm::Propagated { weight, step, acc, .. } => {
                            out += side_mul(side, step, acc) * cplx(*weight * dt);
                        }
                    }
                }
                out
            }
        }
    }

    /// Registers a freshly accepted sample.
    fn push(&mut self, sample: &CMatrix<T>, side: Side) {
        if let History::Separable(terms) = self {
            for term in terms {
                match term {
                    SeparableTerm::Exponential { q, acc, .. } => {
                        *acc *= cplx(*q);
                        *acc += sample;
                    }
                    SeparableTerm::Propagated { step, acc, .. } => {
                        *acc = side_mul(side, step, acc) + sample;
                    }
                    SeparableTerm::Sampled { .. } => {}
                }
            }
        }
    }

    fn integral_norm(&self, dt: T) -> T {
        match self {
            History::Zero => T::zero(),
            History::Dense(k) => k.iter().map(|m| m.norm()).fold(T::zero(), |a, b| a + b) * dt,
            History::Separable(terms) => terms
                .iter()
                .map(|term| match term {
                    SeparableTerm::Exponential { amplitude, q, map, .. } => {
                        // Σ_m |a| q^m dt ≈ |a| dt / (1 − q)
                        let denom = (T::one() - *q).max(T::default_epsilon());
                        amplitude.abs() * dt / denom * map.norm()
                    }
                    SeparableTerm::Sampled { weights, map } => {
                        weights.iter().map(|w| w.abs()).fold(T::zero(), |a, b| a + b) * dt * map.norm()
                    }
                    SeparableTerm::Propagated { weight, step, horizon, .. } => weight.abs() * *horizon * step.norm(),
                })
                .fold(T::zero(), |a, b| a + b),
        }
    }
}

/// Which part of a [`KernelSpec`] enters the history integral.
#[derive(Clone, Copy, PartialEq, Eq)]
enum KernelRole {
    Full,
    CompensatorOnly,
}

fn check_scaled_weights<T: Real>(kernel: &ScalarKernel<T>, cfg: &SolverConfig<T>, steps: usize) -> Result<()> {
    let bad = match kernel {
        ScalarKernel::Exponential { amplitude, .. } => (*amplitude < T::zero()).then_some(T::zero()),
        _ => (0..=steps).map(|n| cfg.time(n)).find(|&t| kernel.eval(t) < T::zero()),
    };
    match bad {
        Some(t) => Err(Error::InvalidParameter(format!("kernel weight k(t) is negative at t = {:e}", t))),
        None => Ok(()),
    }
}

fn kernel_history<T: Real>(kernel: &KernelSpec<T>, role: KernelRole, cfg: &SolverConfig<T>, steps: usize) -> Result<History<T>> {
    if kernel.cp_part.is_zero() && kernel.hamiltonian.is_none() {
        return Ok(History::Zero);
    }
    if let Some((k, b, z)) = kernel.separable() {
        check_scaled_weights(k, cfg, steps)?;
        let map = match role {
            KernelRole::Full => (b + &z).into_matrix(),
            KernelRole::CompensatorOnly => z.into_matrix(),
        };
        return Ok(History::separable(k, map, cfg, steps));
    }
    let bs = family_samples(&kernel.cp_part, cfg.dt, steps)?;
    let mut out = Vec::with_capacity(bs.len());
    for (n, b) in bs.into_iter().enumerate() {
        let z = kernel.z_at(&b, cfg.time(n))?;
        out.push(match role {
            KernelRole::Full => (&b + &z).into_matrix(),
            KernelRole::CompensatorOnly => z.into_matrix(),
        });
    }
    Ok(History::Dense(out))
}

/// `B_{n·dt}` for `n = 0..=steps`.
fn family_samples<T: Real>(family: &CpFamily<T>, dt: T, steps: usize) -> Result<Vec<SuperOperator<T>>> {
    match family {
        CpFamily::Semigroup { weight, generator } => {
            let step = crate::analytic::expm_superop(generator, dt);
            let mut cur = SuperOperator::identity(generator.dim());
            let mut out = Vec::with_capacity(steps + 1);
            for _ in 0..=steps {
                out.push(cur.scale(*weight));
                cur = cur.compose(&step)?;
            }
            Ok(out)
        }
        _ => (0..=steps).map(|n| family.at(T::from_usize(n).unwrap() * dt)).collect(),
    }
}

fn check_generator<T: Real>(l: &SuperOperator<T>, what: &str) -> Result<()> {
    let residual = l.apply_unit().norm();
    if residual > real::<T>(1e-9) * l.norm().max(T::one()) {
        return Err(Error::NotUnital { what: format!("{what} (L(1) must vanish)"), residual: to_f64(residual) });
    }
    Ok(())
}

fn stability_advisory<T: Real>(cfg: &SolverConfig<T>, generator: &SuperOperator<T>, history: &History<T>) {
    let indicator = cfg.dt * (generator.norm() + history.integral_norm(cfg.dt));
    if indicator >= real(0.5) {
        log::warn!(
            "dt = {:e} may be too coarse: dt·(‖L‖ + ∫‖L_s‖ds) = {:e} ≥ 0.5",
            cfg.dt,
            indicator
        );
    }
}

/// Core predictor–corrector loop for `X′ = G X + ∫ K_{t−s} X_s ds` (or the
/// right-multiplied analogue), `X_0 = id`.
fn integrate<T: Real>(
    generator: &SuperOperator<T>,
    mut history: History<T>,
    cfg: &SolverConfig<T>,
    steps: usize,
    side: Side,
    kind: TrajectoryKind,
) -> Result<Trajectory<T>> {
    let d = generator.dim();
    let m = d * d;
    stability_advisory(cfg, generator, &history);

    let dt = cfg.dt;
    let half_dt = cplx(dt * real(0.5));
    let cdt = cplx(dt);
    let implicit = generator.matrix() + history.at_zero(m) * half_dt;

    let mut a: Vec<CMatrix<T>> = Vec::with_capacity(steps + 1);
    a.push(CMatrix::identity(m, m));
    let mut f_prev = generator.matrix().clone();

    for n in 0..steps {
        let known = history.known_part(&a, side, dt);
        let a_n = &a[n];
        let mut x = a_n + &f_prev * cdt;
        for _ in 0..cfg.corrector_iterations {
            let fx = side_mul(side, &implicit, &x) + &known;
            x = a_n + (&f_prev + fx) * half_dt;
        }
        let f_new = side_mul(side, &implicit, &x) + &known;
        if !all_finite(&x) || !all_finite(&f_new) {
            return Err(Error::NonFinite { t: to_f64(cfg.time(n + 1)) });
        }
        history.push(&x, side);
        a.push(x);
        f_prev = f_new;
    }

    let times = (0..=steps).map(|n| cfg.time(n)).collect();
    let samples = a.into_iter().map(|mat| SuperOperator::from_matrix_unchecked(d, mat)).collect();
    Ok(Trajectory { dim: d, dt, times, samples, kind, dual: false })
}

fn prepare<T: Real>(l: &SuperOperator<T>, kernel_dim: usize, cfg: &SolverConfig<T>) -> Result<usize> {
    check_dim(l.dim(), cfg.allow_large)?;
    if kernel_dim != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: kernel_dim });
    }
    cfg.steps()
}

/// Solves `dA/dt = L A + ∫₀ᵗ L_{t−s} A_s ds`, `A_0 = id`.
pub fn solve_master<T: Real>(l: &SuperOperator<T>, kernel: &KernelSpec<T>, cfg: &SolverConfig<T>) -> Result<Trajectory<T>> {
    let steps = prepare(l, kernel.dim(), cfg)?;
    check_generator(l, "generator")?;
    let history = kernel_history(kernel, KernelRole::Full, cfg, steps)?;
    integrate(l, history, cfg, steps, Side::Left, TrajectoryKind::Master)
}

/// Solves the right-multiplied form `dA/dt = A L + ∫₀ᵗ A_s L_{t−s} ds`.
pub fn solve_master_right<T: Real>(
    l: &SuperOperator<T>,
    kernel: &KernelSpec<T>,
    cfg: &SolverConfig<T>,
) -> Result<Trajectory<T>> {
    let steps = prepare(l, kernel.dim(), cfg)?;
    check_generator(l, "generator")?;
    let history = kernel_history(kernel, KernelRole::Full, cfg, steps)?;
    integrate(l, history, cfg, steps, Side::Right, TrajectoryKind::MasterRight)
}

/// Solves `dN/dt = L N + ∫₀ᵗ Z_{t−s} N_s ds`, `N_0 = id`.
pub fn solve_normalization<T: Real>(
    l: &SuperOperator<T>,
    kernel: &KernelSpec<T>,
    cfg: &SolverConfig<T>,
) -> Result<Trajectory<T>> {
    let steps = prepare(l, kernel.dim(), cfg)?;
    check_generator(l, "generator")?;
    let history = kernel_history(kernel, KernelRole::CompensatorOnly, cfg, steps)?;
    integrate(l, history, cfg, steps, Side::Left, TrajectoryKind::Normalization)
}

fn cp_failure<T: Real>(what: &str, cert: &CpCertificate<T>) -> Error {
    Error::NotCompletelyPositive { what: what.into(), min_eigenvalue: to_f64(cert.min_choi_eigenvalue) }
}

fn family_history<T: Real>(family: &CpFamily<T>, cfg: &SolverConfig<T>, steps: usize, check_cp: bool) -> Result<History<T>> {
    let th = Thresholds::default();
    match family {
        CpFamily::Zero { .. } => Ok(History::Zero),
        CpFamily::Scaled { kernel, map } => {
            if check_cp {
                let cert = certify_with(map, &th);
                if !cert.is_cp() {
                    return Err(cp_failure("B_t", &cert));
                }
            }
            check_scaled_weights(kernel, cfg, steps)?;
            Ok(History::separable(kernel, map.matrix().clone(), cfg, steps))
        }
        CpFamily::Semigroup { weight, generator } => {
            let step = crate::analytic::expm_superop(generator, cfg.dt);
            if check_cp {
                let cert = certify_with(&step.scale(*weight), &th);
                if !cert.is_cp() {
                    return Err(cp_failure(&format!("B_t at t = {:e}", to_f64(cfg.dt)), &cert));
                }
            }
            let m = step.matrix().nrows();
            Ok(History::Separable(vec![SeparableTerm::Propagated {
                weight: *weight,
                step: step.into_matrix(),
                acc: CMatrix::identity(m, m) * cplx(real::<T>(0.5)),
                horizon: cfg.time(steps),
            }]))
        }
        _ => {
            let samples = family_samples(family, cfg.dt, steps)?;
            // Kraus families are CP by construction.
            if check_cp && !matches!(family, CpFamily::Kraus { .. }) {
                for (n, b) in samples.iter().enumerate() {
                    let cert = certify_with(b, &th);
                    if !cert.is_cp() {
                        return Err(cp_failure(&format!("B_t at t = {:e}", to_f64(cfg.time(n))), &cert));
                    }
                }
            }
            Ok(History::Dense(samples.into_iter().map(SuperOperator::into_matrix).collect()))
        }
    }
}

/// Solves `dV/dt = P V + ∫₀ᵗ B_{t−s} V_s ds`, `V_0 = id`, with `P` and every
/// sampled `B_t` required to be completely positive.
pub fn solve_modified<T: Real>(p: &SuperOperator<T>, family: &CpFamily<T>, cfg: &SolverConfig<T>) -> Result<Trajectory<T>> {
    let steps = prepare(p, family.dim(), cfg)?;
    let cert = certify_with(p, &Thresholds::default());
    if !cert.is_cp() {
        return Err(cp_failure("P", &cert));
    }
    let history = family_history(family, cfg, steps, true)?;
    integrate(p, history, cfg, steps, Side::Left, TrajectoryKind::Modified)
}

/// The semigroup special case `dV/dt = L V + λ² ∫₀ᵗ e^{(t−s)L} V_s ds` with a
/// GKSL generator `L` in place of the CP map `P`. Solution: `cosh(λt)e^{tL}`.
pub fn solve_semigroup_example<T: Real>(l: &SuperOperator<T>, lambda: T, cfg: &SolverConfig<T>) -> Result<Trajectory<T>> {
    let steps = prepare(l, l.dim(), cfg)?;
    check_generator(l, "semigroup generator")?;
    let family = CpFamily::Semigroup { weight: lambda * lambda, generator: l.clone() };
    let history = family_history(&family, cfg, steps, false)?;
    integrate(l, history, cfg, steps, Side::Left, TrajectoryKind::Modified)
}

/// Result of [`series_solve`].
#[derive(Clone, Debug)]
pub struct SeriesSolution<T: Real> {
    pub trajectory: Trajectory<T>,
    /// Number of iterations performed; 0 when `B ≡ 0`.
    pub order: usize,
    /// `sup_t ‖A⁽ᵒʳᵈᵉʳ⁾_t − A⁽ᵒʳᵈᵉʳ⁻¹⁾_t‖` of the last iteration.
    pub last_increment: T,
}

/// Fixed-point iteration of `A = N + ∫₀ᵗdu ∫₀^{t−u}ds N_{t−u−s} B_u A_s`
/// starting from `A⁽⁰⁾ = N`.
pub fn series_solve<T: Real>(
    n: &Trajectory<T>,
    kernel: &KernelSpec<T>,
    max_order: usize,
    tol: T,
) -> Result<SeriesSolution<T>> {
    series_solve_observed(n, kernel, max_order, tol, |_, _| {})
}

/// [`series_solve`] calling `observer(order, iterate)` on every iterate, `A⁽⁰⁾ = N` included.
pub fn series_solve_observed<T: Real>(
    n: &Trajectory<T>,
    kernel: &KernelSpec<T>,
    max_order: usize,
    tol: T,
    mut observer: impl FnMut(usize, &Trajectory<T>),
) -> Result<SeriesSolution<T>> {
    if kernel.dim() != n.dim() {
        return Err(Error::DimensionMismatch { expected: n.dim(), found: kernel.dim() });
    }
    if n.is_dual() {
        return Err(Error::InvalidParameter("series iteration expects a Heisenberg-picture N_t".into()));
    }
    let start = n.clone().with_kind(TrajectoryKind::Series);
    observer(0, &start);
    if kernel.cp_part.is_zero() {
        return Ok(SeriesSolution { trajectory: start, order: 0, last_increment: T::zero() });
    }

    let len = n.len();
    let dt = n.dt();
    let steps = len - 1;
    let b: Vec<CMatrix<T>> = family_samples(&kernel.cp_part, dt, steps)?.into_iter().map(SuperOperator::into_matrix).collect();
    let nm: Vec<&CMatrix<T>> = n.samples().iter().map(SuperOperator::matrix).collect();
    let m = nm[0].nrows();
    let one = cplx(T::one());
    let half = cplx(real::<T>(0.5));

    // G_τ = ∫₀^τ N_{τ−u} B_u du on the grid
    let mut g: Vec<CMatrix<T>> = Vec::with_capacity(len);
    g.push(CMatrix::zeros(m, m));
    for k in 1..len {
        let mut acc = CMatrix::zeros(m, m);
        acc.gemm(half, nm[k], &b[0], one);
        for u in 1..k {
            acc.gemm(one, nm[k - u], &b[u], one);
        }
        acc.gemm(half, nm[0], &b[k], one);
        g.push(acc * cplx(dt));
    }

    let mut current: Vec<CMatrix<T>> = nm.iter().map(|x| (*x).clone()).collect();
    let mut increment = T::zero();
    for order in 1..=max_order {
        let mut next: Vec<CMatrix<T>> = Vec::with_capacity(len);
        next.push(nm[0].clone());
        for k in 1..len {
            // G_0 = 0, so the s = t_k endpoint drops out
            let mut acc = CMatrix::zeros(m, m);
            acc.gemm(half, &g[k], &current[0], one);
            for j in 1..k {
                acc.gemm(one, &g[k - j], &current[j], one);
            }
            let mut x = nm[k].clone();
            axpy(&mut x, cplx(dt), &acc);
            if !all_finite(&x) {
                return Err(Error::NonFinite { t: to_f64(n.times()[k]) });
            }
            next.push(x);
        }
        increment = next
            .iter()
            .zip(&current)
            .map(|(a, b)| crate::scalar::spectral_norm(&(a - b)))
            .fold(T::zero(), |acc, x| if x > acc { x } else { acc });
        current = next;
        let traj = Trajectory {
            dim: n.dim(),
            dt,
            times: n.times().to_vec(),
            samples: current.iter().map(|mat| SuperOperator::from_matrix_unchecked(n.dim(), mat.clone())).collect(),
            kind: TrajectoryKind::Series,
            dual: false,
        };
        observer(order, &traj);
        if increment <= tol {
            return Ok(SeriesSolution { trajectory: traj, order, last_increment: increment });
        }
    }
    Err(Error::NotConverged { order: max_order, increment: to_f64(increment) })
}

/// Pointwise Hilbert–Schmidt adjoint (Heisenberg ↔ Schrödinger).
pub fn dual<T: Real>(traj: &Trajectory<T>) -> Trajectory<T> {
    Trajectory {
        dim: traj.dim,
        dt: traj.dt,
        times: traj.times.clone(),
        samples: traj.samples.iter().map(SuperOperator::adjoint).collect(),
        kind: traj.kind,
        dual: !traj.dual,
    }
}

/// `A_t(a) = V_t(1)^{−1/2} V_t(a) V_t(1)^{−1/2}`; fails at the first sample
/// whose `V_t(1)` has an eigenvalue below `floor`.
pub fn normalize_evolution<T: Real>(v: &Trajectory<T>, floor: T) -> Result<Trajectory<T>> {
    let d = v.dim();
    let mut samples = Vec::with_capacity(v.len());
    for (t, s) in v.times().iter().zip(v.samples()) {
        let unit = s.apply_unit();
        let herm = (unit.matrix() + unit.matrix().adjoint()) * cplx(real::<T>(0.5));
        let eig = herm.symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b));
        if !(min >= floor) {
            return Err(Error::PositivityFloor { t: to_f64(*t), min_eigenvalue: to_f64(min), floor: to_f64(floor) });
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| cplx(T::one() / x.sqrt())));
        let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
        let w = Operator::new(w)?;
        samples.push(SuperOperator::sandwich(&w, &w)?.compose(s)?);
    }
    samples[0] = SuperOperator::identity(d);
    Ok(Trajectory { dim: d, dt: v.dt(), times: v.times().to_vec(), samples, kind: TrajectoryKind::Normalized, dual: v.is_dual() })
}

#[derive(Clone, Debug)]
pub struct TrajectoryCertificate<T: Real> {
    /// `(t, certificate)` for every certified sample.
    pub entries: Vec<(T, CpCertificate<T>)>,
    pub global_min_choi_eigenvalue: T,
    pub first_not_cp_time: Option<T>,
    pub thresholds: Thresholds<T>,
}

impl<T: Real> TrajectoryCertificate<T> {
    pub fn all_cp(&self) -> bool {
        self.entries.iter().all(|(_, c)| c.is_cp())
    }

    pub fn any_not_cp(&self) -> bool {
        self.first_not_cp_time.is_some()
    }

    /// NOT_CP if any sample is, CP if all are, INCONCLUSIVE otherwise.
    pub fn verdict(&self) -> Verdict {
        if self.any_not_cp() {
            Verdict::NotCp
        } else if self.all_cp() {
            Verdict::Cp
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Certifies every `stride`-th sample and the final one.
pub fn certify_trajectory<T: Real>(traj: &Trajectory<T>, thresholds: &Thresholds<T>, stride: usize) -> TrajectoryCertificate<T> {
    let stride = stride.max(1);
    let last = traj.len() - 1;
    let mut indices: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if indices.last() != Some(&last) {
        indices.push(last);
    }
    let mut entries = Vec::with_capacity(indices.len());
    let mut global = T::max_value().unwrap_or_else(T::one);
    let mut first_not_cp = None;
    for i in indices {
        let cert = certify_with(&traj.samples()[i], thresholds);
        if cert.min_choi_eigenvalue < global {
            global = cert.min_choi_eigenvalue;
        }
        if cert.verdict == Verdict::NotCp && first_not_cp.is_none() {
            first_not_cp = Some(traj.times()[i]);
        }
        entries.push((traj.times()[i], cert));
    }
    TrajectoryCertificate { entries, global_min_choi_eigenvalue: global, first_not_cp_time: first_not_cp, thresholds: *thresholds }
}
