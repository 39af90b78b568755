//! Operators on `C^d`, linear maps on `M_d`, and the complete-positivity
//! certificate built from the Choi matrix.
//!
//! Conventions fixed here and used everywhere else:
//!
//! * vectorization is column stacking, so `vec(x y z) = (zᵀ ⊗ x) vec(y)`;
//! * a [`SuperOperator`] stores the `d² × d²` matrix acting on `vec(a)`;
//! * the Choi matrix is `J(S) = Σ_ij E_ij ⊗ S(E_ij)`.
//!
//! Because column stacking is an isometry for the Hilbert–Schmidt product
//! `⟨a, b⟩ = tr(a† b)`, the dual map is the conjugate transpose of the stored
//! matrix.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, cplx, imag_unit, modulus, real, spectral_norm, CMatrix, CVector, Real};

/// Dimensions above this need an explicit opt-in (`d⁴` entries per superoperator).
pub const DEFAULT_MAX_DIM: usize = 8;

pub fn check_dim(dim: usize, allow_large: bool) -> Result<()> {
    if dim > DEFAULT_MAX_DIM && !allow_large {
        return Err(Error::DimensionTooLarge { dim, limit: DEFAULT_MAX_DIM });
    }
    Ok(())
}

/// Element of `M_d`: a dense `d × d` complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real> {
    mat: CMatrix<T>,
}

impl<T: Real> Operator<T> {
    pub fn new(mat: CMatrix<T>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidParameter("operator dimension must be positive".into()));
        }
        Ok(Self { mat })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        Self { mat: CMatrix::from_fn(dim, dim, f) }
    }

    /// Builds an operator from row-major real and imaginary parts.
    pub fn from_parts(re: &[Vec<T>], im: Option<&[Vec<T>]>) -> Result<Self> {
        let d = re.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        for row in re {
            if row.len() != d {
                return Err(Error::NotSquare { rows: d, cols: row.len() });
            }
        }
        if let Some(im) = im {
            if im.len() != d || im.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidParameter("imaginary part has the wrong shape".into()));
            }
        }
        Ok(Self::from_fn(d, |i, j| {
            Complex::new(re[i][j], im.map_or(T::zero(), |m| m[i][j]))
        }))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: CMatrix::identity(dim, dim) }
    }

    /// Matrix unit `E_ij = |i⟩⟨j|`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut mat = CMatrix::zeros(dim, dim);
        mat[(i, j)] = cplx(T::one());
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { mat: self.mat.transpose() }
    }

    pub fn trace(&self) -> Complex<T> {
        self.mat.trace()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self { mat: &self.mat * c }
    }

    /// Operator (spectral) norm.
    pub fn norm(&self) -> T {
        spectral_norm(&self.mat)
    }

    pub fn frobenius_norm(&self) -> T {
        self.mat.norm()
    }

    /// `‖a − a†‖` in operator norm.
    pub fn hermiticity_defect(&self) -> T {
        spectral_norm(&(&self.mat - self.mat.adjoint()))
    }

    /// Hermitian within `rel_tol · ‖a‖` (absolute `rel_tol` for the zero operator).
    pub fn is_hermitian(&self, rel_tol: T) -> bool {
        let scale = self.norm().max(T::one());
        self.hermiticity_defect() <= rel_tol * scale
    }

    /// Eigenvalues of the Hermitian part `(a + a†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let herm = (&self.mat + self.mat.adjoint()) * cplx(real::<T>(0.5));
        let mut ev: Vec<T> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.mat)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl<'a, T: Real> Add<&'a Operator<T>> for &'a Operator<T> {
    type Output = Operator<T>;
    fn add(self, rhs: &'a Operator<T>) -> Operator<T> {
        Operator { mat: &self.mat + &rhs.mat }
    }
}

impl<'a, T: Real> Sub<&'a Operator<T>> for &'a Operator<T> {
    type Output = Operator<T>;
    fn sub(self, rhs: &'a Operator<T>) -> Operator<T> {
        Operator { mat: &self.mat - &rhs.mat }
    }
}

impl<'a, T: Real> Mul<&'a Operator<T>> for &'a Operator<T> {
    type Output = Operator<T>;
    fn mul(self, rhs: &'a Operator<T>) -> Operator<T> {
        Operator { mat: &self.mat * &rhs.mat }
    }
}

impl<T: Real> Neg for &Operator<T> {
    type Output = Operator<T>;
    fn neg(self) -> Operator<T> {
        Operator { mat: -self.mat.clone() }
    }
}

/// Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn x<T: Real>() -> Operator<T> {
        Operator::from_fn(2, |i, j| if i != j { cplx(T::one()) } else { Complex::new(T::zero(), T::zero()) })
    }

    pub fn y<T: Real>() -> Operator<T> {
        Operator::from_fn(2, |i, j| match (i, j) {
            (0, 1) => -imag_unit::<T>(),
            (1, 0) => imag_unit(),
            _ => Complex::new(T::zero(), T::zero()),
        })
    }

    pub fn z<T: Real>() -> Operator<T> {
        Operator::from_fn(2, |i, j| match (i, j) {
            (0, 0) => cplx(T::one()),
            (1, 1) => cplx(-T::one()),
            _ => Complex::new(T::zero(), T::zero()),
        })
    }
}

/// Hilbert–Schmidt inner product `tr(a† b)`.
pub fn hs_inner<T: Real>(a: &Operator<T>, b: &Operator<T>) -> Result<Complex<T>> {
    a.check_same_dim(b)?;
    Ok(a.mat.iter().zip(b.mat.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Column-stacking vectorization.
pub fn vec<T: Real>(a: &Operator<T>) -> CVector<T> {
    DVector::from_column_slice(a.mat.as_slice())
}

/// Inverse of [`vec`].
pub fn devec<T: Real>(v: &CVector<T>) -> Result<Operator<T>> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d == 0 || d * d != n {
        return Err(Error::NonSquareLength(n));
    }
    Ok(Operator { mat: CMatrix::from_column_slice(d, d, v.as_slice()) })
}

/// Element of `B(M_d)` stored as a `d² × d²` matrix on column-stacked operators.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator<T: Real> {
    dim: usize,
    mat: CMatrix<T>,
}

impl<T: Real> SuperOperator<T> {
    pub fn from_matrix(dim: usize, mat: CMatrix<T>) -> Result<Self> {
        let n = dim * dim;
        if dim == 0 {
            return Err(Error::InvalidParameter("superoperator dimension must be positive".into()));
        }
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mat.nrows().max(mat.ncols()) });
        }
        Ok(Self { dim, mat })
    }

    /// Caller guarantees `mat` is `dim² × dim²`.
    pub(crate) fn from_matrix_unchecked(dim: usize, mat: CMatrix<T>) -> Self {
        debug_assert_eq!(mat.nrows(), dim * dim);
        Self { dim, mat }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, mat: CMatrix::identity(dim * dim, dim * dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, mat: CMatrix::zeros(dim * dim, dim * dim) }
    }

    /// `a ↦ x a y`.
    pub fn sandwich(x: &Operator<T>, y: &Operator<T>) -> Result<Self> {
        x.check_same_dim(y)?;
        Ok(Self { dim: x.dim(), mat: y.mat.transpose().kronecker(&x.mat) })
    }

    /// `a ↦ h a`.
    pub fn left_mul(h: &Operator<T>) -> Self {
        let id = CMatrix::identity(h.dim(), h.dim());
        Self { dim: h.dim(), mat: id.kronecker(&h.mat) }
    }

    /// `a ↦ a h`.
    pub fn right_mul(h: &Operator<T>) -> Self {
        let id = CMatrix::identity(h.dim(), h.dim());
        Self { dim: h.dim(), mat: h.mat.transpose().kronecker(&id) }
    }

    /// `a ↦ i[h, a]`.
    pub fn commutator(h: &Operator<T>) -> Self {
        let m = (Self::left_mul(h).mat - Self::right_mul(h).mat) * imag_unit::<T>();
        Self { dim: h.dim(), mat: m }
    }

    /// `a ↦ {c, a}`.
    pub fn anticommutator(c: &Operator<T>) -> Self {
        let m = Self::left_mul(c).mat + Self::right_mul(c).mat;
        Self { dim: c.dim(), mat: m }
    }

    /// Unitary (or general) conjugation `a ↦ u a u†`.
    pub fn conjugation(u: &Operator<T>) -> Self {
        Self { dim: u.dim(), mat: u.mat.map(|z| z.conj()).kronecker(&u.mat) }
    }

    /// Heisenberg-picture Kraus map `a ↦ Σ_k v_k† a v_k`.
    pub fn from_kraus(dim: usize, kraus: &[Operator<T>]) -> Result<Self> {
        let mut acc = Self::zeros(dim);
        for v in kraus {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
            }
            // vec(v† a v) = (vᵀ ⊗ v†) vec(a)
            acc.mat += v.mat.transpose().kronecker(&v.mat.adjoint());
        }
        Ok(acc)
    }

    /// Transpose map `a ↦ aᵀ` (positive, not completely positive).
    pub fn transpose_map(dim: usize) -> Self {
        let n = dim * dim;
        let mut mat = CMatrix::zeros(n, n);
        for i in 0..dim {
            for j in 0..dim {
                mat[(j + i * dim, i + j * dim)] = cplx(T::one());
            }
        }
        Self { dim, mat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.mat
    }

    pub fn apply(&self, a: &Operator<T>) -> Result<Operator<T>> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: a.dim() });
        }
        let v = &self.mat * vec(a);
        Ok(Operator { mat: CMatrix::from_column_slice(self.dim, self.dim, v.as_slice()) })
    }

    /// Image of the unit `S(1)`.
    pub fn apply_unit(&self) -> Operator<T> {
        let d = self.dim;
        let mut out = CMatrix::zeros(d, d);
        for k in 0..d {
            let col = k + k * d;
            for r in 0..d * d {
                out[(r % d, r / d)] += self.mat[(r, col)];
            }
        }
        Operator { mat: out }
    }

    /// Dual map with respect to the Hilbert–Schmidt product.
    pub fn adjoint(&self) -> Self {
        Self { dim: self.dim, mat: self.mat.adjoint() }
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { dim: self.dim, mat: &self.mat * &other.mat })
    }

    pub fn scale(&self, c: T) -> Self {
        Self { dim: self.dim, mat: &self.mat * cplx(c) }
    }

    pub fn scale_complex(&self, c: Complex<T>) -> Self {
        Self { dim: self.dim, mat: &self.mat * c }
    }

    /// Operator norm of the representing matrix (induced Hilbert–Schmidt norm).
    pub fn norm(&self) -> T {
        spectral_norm(&self.mat)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.mat)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    /// Choi matrix `Σ_ij E_ij ⊗ S(E_ij)`.
    pub fn choi(&self) -> CMatrix<T> {
        let d = self.dim;
        let n = d * d;
        CMatrix::from_fn(n, n, |row, col| {
            let (i, k) = (row / d, row % d);
            let (j, l) = (col / d, col % d);
            self.mat[(k + l * d, i + j * d)]
        })
    }
}

impl<'a, T: Real> Add<&'a SuperOperator<T>> for &'a SuperOperator<T> {
    type Output = SuperOperator<T>;
    fn add(self, rhs: &'a SuperOperator<T>) -> SuperOperator<T> {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        SuperOperator { dim: self.dim, mat: &self.mat + &rhs.mat }
    }
}

impl<'a, T: Real> Sub<&'a SuperOperator<T>> for &'a SuperOperator<T> {
    type Output = SuperOperator<T>;
    fn sub(self, rhs: &'a SuperOperator<T>) -> SuperOperator<T> {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        SuperOperator { dim: self.dim, mat: &self.mat - &rhs.mat }
    }
}

impl<'a, T: Real> Mul<&'a SuperOperator<T>> for &'a SuperOperator<T> {
    type Output = SuperOperator<T>;
    fn mul(self, rhs: &'a SuperOperator<T>) -> SuperOperator<T> {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        SuperOperator { dim: self.dim, mat: &self.mat * &rhs.mat }
    }
}

/// Free-function form of [`SuperOperator::apply`].
pub fn apply<T: Real>(s: &SuperOperator<T>, a: &Operator<T>) -> Result<Operator<T>> {
    s.apply(a)
}

pub fn adjoint<T: Real>(s: &SuperOperator<T>) -> SuperOperator<T> {
    s.adjoint()
}

pub fn choi<T: Real>(s: &SuperOperator<T>) -> CMatrix<T> {
    s.choi()
}

/// Ascending eigenvalues of the Hermitian part of a square matrix.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let herm = (m + m.adjoint()) * cplx(real::<T>(0.5));
    let mut ev: Vec<T> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Cp,
    NotCp,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Cp => "CP",
            Verdict::NotCp => "NOT_CP",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two-sided cutoff on the smallest Choi eigenvalue:
/// `≥ −tol` is CP, `< −tol_strict` is NOT_CP, anything between is inconclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds<T> {
    pub tol: T,
    pub tol_strict: T,
}

impl<T: Real> Default for Thresholds<T> {
    fn default() -> Self {
        Self { tol: real(1e-9), tol_strict: real(1e-6) }
    }
}

impl<T: Real> Thresholds<T> {
    pub fn new(tol: T, tol_strict: T) -> Result<Self> {
        if !(tol > T::zero()) || tol_strict < tol {
            return Err(Error::InvalidParameter(format!(
                "thresholds need 0 < tol <= tol_strict (got {tol:e}, {tol_strict:e})"
            )));
        }
        Ok(Self { tol, tol_strict })
    }

    /// `tol` with the default strict cutoff (raised to `tol` if needed).
    pub fn with_tol(tol: T) -> Self {
        let strict = real::<T>(1e-6).max(tol);
        Self { tol, tol_strict: strict }
    }

    pub fn classify(&self, min_eigenvalue: T) -> Verdict {
        if min_eigenvalue >= -self.tol {
            Verdict::Cp
        } else if min_eigenvalue < -self.tol_strict {
            Verdict::NotCp
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpCertificate<T> {
    pub min_choi_eigenvalue: T,
    /// `‖S(1) − 1‖` in operator norm.
    pub unitality_residual: T,
    /// `max_ij |tr(S*(E_ij)) − tr(E_ij)|`.
    pub trace_residual: T,
    /// `‖J − J†‖_F`; above `1e-8 ‖J‖_F` the map is not Hermiticity preserving.
    pub choi_asymmetry: T,
    pub verdict: Verdict,
}

impl<T: Real> CpCertificate<T> {
    pub fn is_cp(&self) -> bool {
        self.verdict == Verdict::Cp
    }

    pub fn hermiticity_flagged(&self, choi_norm: T) -> bool {
        self.choi_asymmetry > real::<T>(1e-8) * choi_norm
    }
}

/// Certifies with `tol` and the default strict cutoff.
pub fn certify<T: Real>(s: &SuperOperator<T>, tol: T) -> Result<CpCertificate<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    Ok(certify_with(s, &Thresholds::with_tol(tol)))
}

pub fn certify_with<T: Real>(s: &SuperOperator<T>, thresholds: &Thresholds<T>) -> CpCertificate<T> {
    let d = s.dim();
    let j = s.choi();
    let choi_asymmetry = (&j - j.adjoint()).norm();
    let ev = hermitian_eigenvalues(&j);
    let min_choi_eigenvalue = ev.first().copied().unwrap_or_else(T::zero);

    let unit = s.apply_unit();
    let unitality_residual = (&unit - &Operator::identity(d)).norm();

    let dual = s.adjoint();
    let mut trace_residual = T::zero();
    for i in 0..d {
        for k in 0..d {
            let e = Operator::unit(d, i, k);
            let image = dual.apply(&e).expect("dimensions agree");
            let r = modulus(image.trace() - e.trace());
            if r > trace_residual {
                trace_residual = r;
            }
        }
    }

    CpCertificate {
        min_choi_eigenvalue,
        unitality_residual,
        trace_residual,
        choi_asymmetry,
        verdict: thresholds.classify(min_choi_eigenvalue),
    }
}

/// Smallest eigenvalue of the symmetrized Choi matrix.
pub fn min_choi_eigenvalue<T: Real>(s: &SuperOperator<T>) -> T {
    hermitian_eigenvalues(&s.choi()).first().copied().unwrap_or_else(T::zero)
}
