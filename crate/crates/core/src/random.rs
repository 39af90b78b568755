//! Seeded random operators and channels for property checks and scenario generation.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operator::{Operator, SuperOperator};
use crate::scalar::{cplx, real, CMatrix, Real};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry<T: Real, R: Rng>(rng: &mut R) -> Complex<T> {
    Complex::new(real(rng.gen_range(-1.0..1.0)), real(rng.gen_range(-1.0..1.0)))
}

/// Entries uniform in the unit square of the complex plane.
pub fn operator<T: Real, R: Rng>(rng: &mut R, dim: usize) -> Operator<T> {
    Operator::from_fn(dim, |_, _| entry(rng))
}

pub fn hermitian<T: Real, R: Rng>(rng: &mut R, dim: usize) -> Operator<T> {
    let a = operator::<T, R>(rng, dim);
    (&a + &a.adjoint()).scale(cplx(real(0.5)))
}

/// `exp(i h)` for a random Hermitian `h`.
pub fn unitary<T: Real, R: Rng>(rng: &mut R, dim: usize) -> Operator<T> {
    let h = hermitian::<T, R>(rng, dim);
    let m = (h.matrix() * Complex::new(T::zero(), real(2.0))).exp();
    Operator::new(m).expect("square")
}

/// Arbitrary linear map (generally neither positive nor unital).
pub fn superoperator<T: Real, R: Rng>(rng: &mut R, dim: usize) -> SuperOperator<T> {
    let n = dim * dim;
    SuperOperator::from_matrix(dim, CMatrix::from_fn(n, n, |_, _| entry(rng))).expect("shape")
}

pub fn kraus_list<T: Real, R: Rng>(rng: &mut R, dim: usize, count: usize) -> Vec<Operator<T>> {
    (0..count).map(|_| operator(rng, dim)).collect()
}

/// Random mixture of unitary conjugations `a ↦ Σ_k p_k u_k† a u_k` (CP and unital).
pub fn unital_channel<T: Real, R: Rng>(rng: &mut R, dim: usize, count: usize) -> SuperOperator<T> {
    let weights: Vec<f64> = (0..count.max(1)).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let kraus: Vec<Operator<T>> = weights
        .iter()
        .map(|w| unitary::<T, R>(rng, dim).scale(cplx(real((w / total).sqrt()))))
        .collect();
    SuperOperator::from_kraus(dim, &kraus).expect("dimensions agree")
}
