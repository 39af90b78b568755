//! Markovian generators and memory kernels.
//!
//! A [`KernelSpec`] describes `L_t = B_t + Z_t` where `B_t` is completely
//! positive and the compensator
//! `Z_t(a) = −½{B_t(1), a} + i[h_t, a]`
//! is rebuilt from `B_t` on every evaluation, so `L_t(1) = 0` holds by
//! construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{certify_with, Operator, SuperOperator, Thresholds};
use crate::scalar::{real, to_f64, Real};

/// Hamiltonian and Heisenberg-picture Kraus list of a GKSL generator
/// `L a = i[h, a] + F a − ½{F(1), a}` with `F(a) = Σ_k v_k† a v_k`.
#[derive(Clone, Debug)]
pub struct GkslSpec<T: Real> {
    pub h: Operator<T>,
    pub kraus: Vec<Operator<T>>,
}

impl<T: Real> GkslSpec<T> {
    pub fn new(h: Operator<T>, kraus: Vec<Operator<T>>) -> Self {
        Self { h, kraus }
    }

    pub fn hamiltonian_only(h: Operator<T>) -> Self {
        Self { h, kraus: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }
}

fn hermiticity_tol<T: Real>() -> T {
    real::<T>(1e-12).max(T::default_epsilon() * real(100.0))
}

pub(crate) fn check_hermitian<T: Real>(h: &Operator<T>) -> Result<()> {
    let defect = h.hermiticity_defect();
    if defect > hermiticity_tol::<T>() * h.norm() {
        return Err(Error::NotHermitian { defect: to_f64(defect) });
    }
    Ok(())
}

/// `a ↦ −½{F(1), a} + i[h, a]` for a given `F(1)`.
pub(crate) fn compensator<T: Real>(f_unit: &Operator<T>, h: Option<&Operator<T>>) -> SuperOperator<T> {
    let z = SuperOperator::anticommutator(f_unit).scale(real(-0.5));
    match h {
        Some(h) => &z + &SuperOperator::commutator(h),
        None => z,
    }
}

/// Builds the generator `L` of a completely positive unital semigroup.
pub fn gksl<T: Real>(spec: &GkslSpec<T>) -> Result<SuperOperator<T>> {
    let d = spec.dim();
    check_hermitian(&spec.h)?;
    let f = SuperOperator::from_kraus(d, &spec.kraus)?;
    let z = compensator(&f.apply_unit(), Some(&spec.h));
    Ok(&f + &z)
}

/// Scalar weight `k(t)` of a memory kernel.
#[derive(Clone)]
pub enum ScalarKernel<T: Real> {
    /// `amplitude · e^{−rate·t}`.
    Exponential { amplitude: T, rate: T },
    /// Piecewise-linear interpolation of `(times, values)`; constant beyond the last node.
    Table { times: Vec<T>, values: Vec<T> },
    Function(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> fmt::Debug for ScalarKernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { amplitude, rate } => f
                .debug_struct("Exponential")
                .field("amplitude", amplitude)
                .field("rate", rate)
                .finish(),
            Self::Table { times, .. } => f.debug_struct("Table").field("nodes", &times.len()).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl<T: Real> ScalarKernel<T> {
    pub fn table(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter("kernel table needs equal, non-empty columns".into()));
        }
        if times[0] != T::zero() {
            return Err(Error::InvalidParameter("kernel table must start at t = 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("kernel table times must increase strictly".into()));
        }
        Ok(Self::Table { times, values })
    }

    pub fn eval(&self, t: T) -> T {
        match self {
            Self::Exponential { amplitude, rate } => *amplitude * (-*rate * t).exp(),
            Self::Table { times, values } => {
                let last = times.len() - 1;
                if t >= times[last] {
                    return values[last];
                }
                let idx = times.partition_point(|&s| s <= t).saturating_sub(1);
                let (t0, t1) = (times[idx], times[idx + 1]);
                let w = (t - t0) / (t1 - t0);
                values[idx] * (T::one() - w) + values[idx + 1] * w
            }
            Self::Function(f) => f(t),
        }
    }

    /// Laplace transform when it has a closed form.
    pub fn laplace(&self, p: T) -> Option<Result<T>> {
        match self {
            Self::Exponential { amplitude, rate } => {
                if p + *rate <= T::zero() {
                    Some(Err(Error::BelowAbscissa { p: to_f64(p), abscissa: to_f64(-*rate) }))
                } else {
                    Some(Ok(*amplitude / (p + *rate)))
                }
            }
            _ => None,
        }
    }
}

/// How a time-dependent Kraus family varies in `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    Continuous,
    PiecewiseContinuous,
}

pub type KrausFn<T> = Arc<dyn Fn(T) -> Vec<Operator<T>> + Send + Sync>;
pub type HamiltonianFn<T> = Arc<dyn Fn(T) -> Operator<T> + Send + Sync>;

/// A family of completely positive maps `t ↦ B_t`.
#[derive(Clone)]
pub enum CpFamily<T: Real> {
    Zero { dim: usize },
    /// `B_t = k(t) · map` with `map` CP and `k ≥ 0`.
    Scaled { kernel: ScalarKernel<T>, map: SuperOperator<T> },
    /// `B_t = weight · e^{t G}` for a GKSL generator `G`.
    Semigroup { weight: T, generator: SuperOperator<T> },
    /// `B_t(a) = Σ_k v_k(t)† a v_k(t)`.
    Kraus { dim: usize, family: KrausFn<T>, smoothness: Smoothness },
}

impl<T: Real> fmt::Debug for CpFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero { dim } => write!(f, "Zero {{ dim: {dim} }}"),
            Self::Scaled { kernel, map } => write!(f, "Scaled {{ kernel: {kernel:?}, dim: {} }}", map.dim()),
            Self::Semigroup { weight, generator } => {
                write!(f, "Semigroup {{ weight: {weight:?}, dim: {} }}", generator.dim())
            }
            Self::Kraus { dim, smoothness, .. } => write!(f, "Kraus {{ dim: {dim}, smoothness: {smoothness:?} }}"),
        }
    }
}

impl<T: Real> CpFamily<T> {
    /// Scaled family; rejects a `map` that does not certify CP.
    pub fn scaled(kernel: ScalarKernel<T>, map: SuperOperator<T>) -> Result<Self> {
        let cert = certify_with(&map, &Thresholds::default());
        if !cert.is_cp() {
            return Err(Error::NotCompletelyPositive {
                what: "kernel channel".into(),
                min_eigenvalue: to_f64(cert.min_choi_eigenvalue),
            });
        }
        Ok(Self::Scaled { kernel, map })
    }

    pub fn kraus(dim: usize, family: KrausFn<T>, smoothness: Smoothness) -> Self {
        Self::Kraus { dim, family, smoothness }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Zero { dim } | Self::Kraus { dim, .. } => *dim,
            Self::Scaled { map, .. } => map.dim(),
            Self::Semigroup { generator, .. } => generator.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero { .. })
    }

    pub fn at(&self, t: T) -> Result<SuperOperator<T>> {
        if !(t >= T::zero()) {
            return Err(Error::OutsideDomain { t: to_f64(t) });
        }
        Ok(match self {
            Self::Zero { dim } => SuperOperator::zeros(*dim),
            Self::Scaled { kernel, map } => map.scale(kernel.eval(t)),
            Self::Semigroup { weight, generator } => {
                crate::analytic::expm_superop(generator, t).scale(*weight)
            }
            Self::Kraus { dim, family, .. } => {
                let ops = family(t);
                SuperOperator::from_kraus(*dim, &ops)?
            }
        })
    }
}

/// Memory kernel `L_t = B_t + Z_t`.
#[derive(Clone)]
pub struct KernelSpec<T: Real> {
    pub cp_part: CpFamily<T>,
    /// `h_t`; `None` means identically zero.
    pub hamiltonian: Option<HamiltonianFn<T>>,
}

impl<T: Real> fmt::Debug for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("cp_part", &self.cp_part)
            .field("hamiltonian", &self.hamiltonian.as_ref().map(|_| ".."))
            .finish()
    }
}

/// `B_t`, `Z_t` and `L_t = B_t + Z_t` at one time.
#[derive(Clone, Debug)]
pub struct KernelSample<T: Real> {
    pub b: SuperOperator<T>,
    pub z: SuperOperator<T>,
    pub l: SuperOperator<T>,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(cp_part: CpFamily<T>) -> Self {
        Self { cp_part, hamiltonian: None }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(CpFamily::Zero { dim })
    }

    pub fn with_hamiltonian(mut self, h: HamiltonianFn<T>) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn dim(&self) -> usize {
        self.cp_part.dim()
    }

    /// True when `L_t ≡ 0`.
    pub fn is_zero(&self) -> bool {
        self.cp_part.is_zero() && self.hamiltonian.is_none()
    }

    pub fn hamiltonian_at(&self, t: T) -> Result<Option<Operator<T>>> {
        match &self.hamiltonian {
            None => Ok(None),
            Some(f) => {
                let h = f(t);
                if h.dim() != self.dim() {
                    return Err(Error::DimensionMismatch { expected: self.dim(), found: h.dim() });
                }
                check_hermitian(&h)?;
                Ok(Some(h))
            }
        }
    }

    pub fn z_at(&self, b: &SuperOperator<T>, t: T) -> Result<SuperOperator<T>> {
        let h = self.hamiltonian_at(t)?;
        Ok(compensator(&b.apply_unit(), h.as_ref()))
    }

    /// Static split `L_t = k(t)·(B + Z)` available when the CP part is a scaled
    /// constant map and `h_t ≡ 0`: returns `(k, B, Z)`.
    pub fn separable(&self) -> Option<(&ScalarKernel<T>, &SuperOperator<T>, SuperOperator<T>)> {
        match (&self.cp_part, &self.hamiltonian) {
            (CpFamily::Scaled { kernel, map }, None) => Some((kernel, map, compensator(&map.apply_unit(), None))),
            _ => None,
        }
    }
}

pub fn kernel_at<T: Real>(kernel: &KernelSpec<T>, t: T) -> Result<KernelSample<T>> {
    let b = kernel.cp_part.at(t)?;
    let z = kernel.z_at(&b, t)?;
    let l = &b + &z;
    Ok(KernelSample { b, z, l })
}

/// Exponential memory kernel `k(t) = κ² e^{−2κγt}` attached to a CP unital channel.
#[derive(Clone, Debug)]
pub struct LidarShabaniParams<T: Real> {
    pub kappa: T,
    pub gamma: T,
    pub channel: SuperOperator<T>,
}

impl<T: Real> LidarShabaniParams<T> {
    pub fn new(kappa: T, gamma: T, channel: SuperOperator<T>) -> Self {
        Self { kappa, gamma, channel }
    }

    pub fn scalar_kernel(&self) -> ScalarKernel<T> {
        ScalarKernel::Exponential {
            amplitude: self.kappa * self.kappa,
            rate: real::<T>(2.0) * self.kappa * self.gamma,
        }
    }

    pub fn k(&self, t: T) -> T {
        self.scalar_kernel().eval(t)
    }
}

/// Kernel with `B_t = k(t)·B` and `h_t = 0`; for unital `B` this makes
/// `L_t = k(t)(B − id)`.
pub fn lidar_shabani<T: Real>(p: &LidarShabaniParams<T>) -> Result<KernelSpec<T>> {
    if !(p.kappa > T::zero()) || !p.kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {:e}", p.kappa)));
    }
    if !(p.gamma >= T::zero()) || !p.gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {:e}", p.gamma)));
    }
    let th = Thresholds::default();
    let cert = certify_with(&p.channel, &th);
    if !cert.is_cp() {
        return Err(Error::NotCompletelyPositive {
            what: "Lidar-Shabani channel".into(),
            min_eigenvalue: to_f64(cert.min_choi_eigenvalue),
        });
    }
    if cert.unitality_residual > th.tol {
        return Err(Error::NotUnital {
            what: "Lidar-Shabani channel".into(),
            residual: to_f64(cert.unitality_residual),
        });
    }
    Ok(KernelSpec::new(CpFamily::Scaled { kernel: p.scalar_kernel(), map: p.channel.clone() }))
}
