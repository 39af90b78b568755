//! Laplace-domain checks of solver output.
//!
//! For a propagator solving `dA/dt = L A + ∫ L_{t−s} A_s ds` the transform
//! `Â_p` must invert `p·id − L − L̂_p` from both sides, and split as
//! `Â_p = R_p + R_p B̂_p Â_p` with `R_p = (p·id − L − Ẑ_p)^{−1}`. The same
//! identities with `L → P`, `Ẑ → 0` hold for the modified equation.
//! Only real `p > 0` are sampled.

use crate::error::{Error, Result};
use crate::generators::{compensator, CpFamily, KernelSpec};
use crate::operator::{Operator, SuperOperator};
use crate::scalar::{axpy, cplx, real, to_f64, CMatrix, Real};
use crate::volterra::Trajectory;

/// Minimum `p·t_max` for a trusted finite-horizon transform.
pub const DEFAULT_MIN_HORIZON: f64 = 20.0;

#[derive(Clone, Debug)]
pub struct LaplaceTransform<T: Real> {
    pub value: SuperOperator<T>,
    /// `‖A_{t_max}‖ e^{−p t_max} / p`.
    pub truncation_estimate: T,
}

/// Trapezoidal `∫₀^{t_max} e^{−pt} A_t dt` with the default horizon rule.
pub fn laplace_of_trajectory<T: Real>(traj: &Trajectory<T>, p: T) -> Result<LaplaceTransform<T>> {
    laplace_of_trajectory_with(traj, p, real(DEFAULT_MIN_HORIZON))
}

/// As [`laplace_of_trajectory`] with an explicit lower bound on `p·t_max`.
pub fn laplace_of_trajectory_with<T: Real>(traj: &Trajectory<T>, p: T, min_horizon: T) -> Result<LaplaceTransform<T>> {
    if !(p > T::zero()) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {:e}", p)));
    }
    let product = p * traj.t_max();
    if product < min_horizon {
        return Err(Error::InsufficientHorizon { p: to_f64(p), product: to_f64(product), required: to_f64(min_horizon) });
    }
    let dt = traj.dt();
    let last = traj.len() - 1;
    let m = traj.dim() * traj.dim();
    let mut acc = CMatrix::<T>::zeros(m, m);
    for (n, (t, s)) in traj.times().iter().zip(traj.samples()).enumerate() {
        let mut w = (-p * *t).exp();
        if n == 0 || n == last {
            w *= real(0.5);
        }
        axpy(&mut acc, cplx(w), s.matrix());
    }
    let value = SuperOperator::from_matrix(traj.dim(), acc * cplx(dt))?;
    let truncation_estimate = traj.last().norm() * (-product).exp() / p;
    Ok(LaplaceTransform { value, truncation_estimate })
}

/// Quadrature settings for kernels without a closed-form transform.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions<T> {
    /// Upper integration limit; `None` means `40 / p`.
    pub horizon: Option<T>,
    /// Composite Simpson intervals (rounded up to even).
    pub intervals: usize,
}

impl<T> Default for QuadratureOptions<T> {
    fn default() -> Self {
        Self { horizon: None, intervals: 4000 }
    }
}

#[derive(Clone, Debug)]
pub struct KernelHat<T: Real> {
    pub b_hat: SuperOperator<T>,
    pub z_hat: SuperOperator<T>,
    pub l_hat: SuperOperator<T>,
}

fn simpson<T: Real>(
    p: T,
    opts: &QuadratureOptions<T>,
    mut f: impl FnMut(T) -> Result<CMatrix<T>>,
) -> Result<CMatrix<T>> {
    let horizon = opts.horizon.unwrap_or_else(|| real::<T>(40.0) / p);
    let n = opts.intervals.max(2).div_ceil(2) * 2;
    let h = horizon / T::from_usize(n).unwrap();
    let mut acc: Option<CMatrix<T>> = None;
    for i in 0..=n {
        let t = h * T::from_usize(i).unwrap();
        let w = if i == 0 || i == n {
            T::one()
        } else if i % 2 == 1 {
            real(4.0)
        } else {
            real(2.0)
        };
        let term = f(t)? * cplx(w * (-p * t).exp());
        match acc.as_mut() {
            Some(a) => *a += term,
            None => acc = Some(term),
        }
    }
    Ok(acc.expect("at least one node") * cplx(h / real(3.0)))
}

fn family_hat<T: Real>(family: &CpFamily<T>, p: T, opts: &QuadratureOptions<T>) -> Result<SuperOperator<T>> {
    let d = family.dim();
    match family {
        CpFamily::Zero { .. } => Ok(SuperOperator::zeros(d)),
        CpFamily::Scaled { kernel, map } => match kernel.laplace(p) {
            Some(k) => Ok(map.scale(k?)),
            None => {
                let k = simpson(p, opts, |t| Ok(CMatrix::from_element(1, 1, cplx(kernel.eval(t)))))?;
                Ok(map.scale(k[(0, 0)].re))
            }
        },
        CpFamily::Semigroup { weight, generator } => {
            let shifted = CMatrix::identity(d * d, d * d) * cplx(p) - generator.matrix();
            let inv = shifted.lu().try_inverse().ok_or(Error::Singular { p: to_f64(p) })?;
            Ok(SuperOperator::from_matrix(d, inv * cplx(*weight))?)
        }
        CpFamily::Kraus { .. } => {
            let m = simpson(p, opts, |t| family.at(t).map(SuperOperator::into_matrix))?;
            SuperOperator::from_matrix(d, m)
        }
    }
}

/// `B̂_p`, `Ẑ_p` and `L̂_p` with the default quadrature for non-analytic parts.
pub fn kernel_hat<T: Real>(kernel: &KernelSpec<T>, p: T) -> Result<KernelHat<T>> {
    kernel_hat_with(kernel, p, &QuadratureOptions::default())
}

pub fn kernel_hat_with<T: Real>(kernel: &KernelSpec<T>, p: T, opts: &QuadratureOptions<T>) -> Result<KernelHat<T>> {
    if !(p > T::zero()) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {:e}", p)));
    }
    let b_hat = family_hat(&kernel.cp_part, p, opts)?;
    // Z_t is linear in (B_t(1), h_t), so its transform uses B̂_p(1) and ĥ_p.
    let h_hat = match &kernel.hamiltonian {
        None => None,
        Some(_) => {
            let m = simpson(p, opts, |t| Ok(kernel.hamiltonian_at(t)?.expect("hamiltonian present").into_matrix()))?;
            Some(Operator::new(m)?)
        }
    };
    let z_hat = compensator(&b_hat.apply_unit(), h_hat.as_ref());
    let l_hat = &b_hat + &z_hat;
    Ok(KernelHat { b_hat, z_hat, l_hat })
}

/// Upper estimate of the spectral radius: `min_k ‖L^{2^k}‖^{1/2^k}`, `k ≤ 4`.
pub fn spectral_radius_estimate<T: Real>(l: &SuperOperator<T>) -> T {
    let mut power = l.matrix().clone();
    let mut best = l.norm();
    let mut exponent = T::one();
    for _ in 0..4 {
        power = &power * &power;
        exponent *= real(2.0);
        let est = crate::scalar::spectral_norm(&power).powf(T::one() / exponent);
        if est < best {
            best = est;
        }
    }
    best
}

/// Smallest admissible `p`: `1.1·max(0.5, ρ̂(L))`.
pub fn abscissa_margin<T: Real>(l: &SuperOperator<T>) -> T {
    real::<T>(0.5).max(spectral_radius_estimate(l)) * real(1.1)
}

#[derive(Clone, Debug)]
pub struct ResolventEntry<T> {
    pub p: T,
    /// `‖(p − L − L̂_p) Â_p − id‖`.
    pub residual_direct: T,
    /// `‖Â_p (p − L − L̂_p) − id‖`.
    pub residual_right: T,
    /// `‖Â_p − R_p − R_p B̂_p Â_p‖`.
    pub residual_factored: T,
    pub truncation_estimate: T,
    /// `tol + truncation_estimate·‖p − L − L̂_p‖`.
    pub bound: T,
    pub pass: bool,
    /// Set when this `p` could not be evaluated.
    pub error: Option<Error>,
}

#[derive(Clone, Debug)]
pub struct ResolventReport<T> {
    pub p_values: Vec<T>,
    pub tol: T,
    pub abscissa_margin: T,
    pub entries: Vec<ResolventEntry<T>>,
}

impl<T: Real> ResolventReport<T> {
    pub fn pass(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.pass)
    }

    pub fn residual_direct(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.residual_direct).collect()
    }

    pub fn residual_right(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.residual_right).collect()
    }

    pub fn residual_factored(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.residual_factored).collect()
    }

    /// Largest of the three residuals over all evaluated `p`.
    pub fn max_residual(&self) -> T {
        self.entries
            .iter()
            .filter(|e| e.error.is_none())
            .flat_map(|e| [e.residual_direct, e.residual_right, e.residual_factored])
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

fn failed_entry<T: Real>(p: T, err: Error) -> ResolventEntry<T> {
    let nan = real::<T>(f64::NAN);
    ResolventEntry {
        p,
        residual_direct: nan,
        residual_right: nan,
        residual_factored: nan,
        truncation_estimate: nan,
        bound: nan,
        pass: false,
        error: Some(err),
    }
}

/// Evaluates the three identities at one `p`; `generator` is `L` (or `P`),
/// `b_hat`/`z_hat` the transformed kernel parts.
fn residuals_at<T: Real>(
    traj: &Trajectory<T>,
    generator: &SuperOperator<T>,
    hat: &KernelHat<T>,
    p: T,
    tol: T,
) -> Result<ResolventEntry<T>> {
    let d = generator.dim();
    let n = d * d;
    let id = CMatrix::<T>::identity(n, n);
    let lt = laplace_of_trajectory(traj, p)?;
    let a_hat = lt.value.matrix();

    let shifted = &id * cplx(p) - generator.matrix();
    let full = &shifted - hat.l_hat.matrix();
    let residual_direct = crate::scalar::spectral_norm(&(&full * a_hat - &id));
    let residual_right = crate::scalar::spectral_norm(&(a_hat * &full - &id));

    let partial = &shifted - hat.z_hat.matrix();
    let r = partial.lu().try_inverse().ok_or(Error::Singular { p: to_f64(p) })?;
    let factored = a_hat - &r - &r * hat.b_hat.matrix() * a_hat;
    let residual_factored = crate::scalar::spectral_norm(&factored);

    let bound = tol + lt.truncation_estimate * crate::scalar::spectral_norm(&full);
    let finite = residual_direct.is_finite() && residual_right.is_finite() && residual_factored.is_finite();
    let pass = finite && residual_direct <= bound && residual_right <= bound && residual_factored <= bound;
    Ok(ResolventEntry {
        p,
        residual_direct,
        residual_right,
        residual_factored,
        truncation_estimate: lt.truncation_estimate,
        bound,
        pass,
        error: None,
    })
}

fn run_report<T: Real>(
    generator: &SuperOperator<T>,
    p_values: &[T],
    tol: T,
    mut hat: impl FnMut(T) -> Result<KernelHat<T>>,
    traj: &Trajectory<T>,
) -> Result<ResolventReport<T>> {
    if traj.dim() != generator.dim() {
        return Err(Error::DimensionMismatch { expected: generator.dim(), found: traj.dim() });
    }
    if traj.is_dual() {
        return Err(Error::InvalidParameter("resolvent identities are checked on Heisenberg-picture trajectories".into()));
    }
    let margin = abscissa_margin(generator);
    let entries = p_values
        .iter()
        .map(|&p| {
            if p < margin {
                return failed_entry(p, Error::BelowAbscissa { p: to_f64(p), abscissa: to_f64(margin) });
            }
            hat(p).and_then(|h| residuals_at(traj, generator, &h, p, tol)).unwrap_or_else(|e| failed_entry(p, e))
        })
        .collect();
    Ok(ResolventReport { p_values: p_values.to_vec(), tol, abscissa_margin: margin, entries })
}

/// Checks a master-equation trajectory against its generator and kernel.
/// Per-`p` failures (horizon, abscissa, singular resolvent) are recorded in
/// the entry and do not abort the other `p`.
pub fn verify_resolvent<T: Real>(
    traj: &Trajectory<T>,
    l: &SuperOperator<T>,
    kernel: &KernelSpec<T>,
    p_values: &[T],
    tol: T,
) -> Result<ResolventReport<T>> {
    run_report(l, p_values, tol, |p| kernel_hat(kernel, p), traj)
}

/// Checks a modified-equation trajectory `V_t` against `P` and `B_t`.
pub fn verify_resolvent_modified<T: Real>(
    traj: &Trajectory<T>,
    p_map: &SuperOperator<T>,
    family: &CpFamily<T>,
    p_values: &[T],
    tol: T,
) -> Result<ResolventReport<T>> {
    let d = p_map.dim();
    run_report(
        p_map,
        p_values,
        tol,
        |p| {
            let b_hat = family_hat(family, p, &QuadratureOptions::default())?;
            Ok(KernelHat { l_hat: b_hat.clone(), b_hat, z_hat: SuperOperator::zeros(d) })
        },
        traj,
    )
}
