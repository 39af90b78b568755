//! Closed-form references.
//!
//! For the exponential kernel `k(t) = κ² e^{−2κγt}` the scalar normalization
//! equation `f′(t) = −∫₀ᵗ k(t−s) f(s) ds`, `f(0) = 1`, has the three-branch
//! solution evaluated by [`f_closed_form`]; it stays non-negative for all
//! times exactly when `γ ≥ 1`.

use crate::operator::SuperOperator;
use crate::scalar::{cplx, real, Real};

/// Half-width of the band around `γ = 1` that is evaluated with the critical branch.
pub const CRITICAL_BAND: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FBranch {
    /// `0 ≤ γ < 1`, damped oscillation.
    Under,
    /// `γ = 1`.
    Critical,
    /// `γ > 1`, monotone decay.
    Over,
}

impl FBranch {
    pub fn for_gamma(gamma: f64) -> Self {
        if (gamma - 1.0).abs() < CRITICAL_BAND {
            FBranch::Critical
        } else if gamma < 1.0 {
            FBranch::Under
        } else {
            FBranch::Over
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FBranch::Under => "under",
            FBranch::Critical => "critical",
            FBranch::Over => "over",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FBranchResult<T> {
    pub value: T,
    pub branch: FBranch,
}

/// `f(t)` for `κ > 0`, `γ ≥ 0`, `t ≥ 0`.
pub fn f_closed_form<T: Real>(kappa: T, gamma: T, t: T) -> FBranchResult<T> {
    debug_assert!(kappa > T::zero() && gamma >= T::zero() && t >= T::zero());
    let one = T::one();
    let branch = FBranch::for_gamma(gamma.to_f64().unwrap_or(f64::NAN));
    let kt = kappa * t;
    let value = match branch {
        FBranch::Critical => (-kt).exp() * (one + kt),
        FBranch::Under => {
            let w = (one - gamma * gamma).sqrt();
            (-gamma * kt).exp() * ((kt * w).cos() + gamma / w * (kt * w).sin())
        }
        FBranch::Over => {
            let w = (gamma * gamma - one).sqrt();
            (-gamma * kt).exp() * ((kt * w).cosh() + gamma / w * (kt * w).sinh())
        }
    };
    FBranchResult { value, branch }
}

/// Scans `[0, t_max]` on `grid` intervals (at least 100) and refines the first
/// sign change by bisection. Returns `(true, None)` when `f` never goes
/// negative, otherwise `(false, Some(first zero crossing))`.
pub fn f_is_nonnegative<T: Real>(kappa: T, gamma: T, t_max: T, grid: usize) -> (bool, Option<T>) {
    let grid = grid.max(100);
    let f = |t: T| f_closed_form(kappa, gamma, t).value;
    let step = t_max / T::from_usize(grid).unwrap();
    let mut prev = T::zero();
    for i in 1..=grid {
        let t = step * T::from_usize(i).unwrap();
        if f(t) < T::zero() {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..200 {
                let mid = (lo + hi) * real(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) < T::zero() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return (false, Some((lo + hi) * real(0.5)));
        }
        prev = t;
    }
    (true, None)
}

/// `e^{tL}` by scaling and squaring with a Padé approximant.
pub fn expm_superop<T: Real>(l: &SuperOperator<T>, t: T) -> SuperOperator<T> {
    let m = (l.matrix() * cplx(t)).exp();
    SuperOperator::from_matrix(l.dim(), m).expect("exponential preserves shape")
}

/// `V_t = cosh(λt)·e^{tL}`, the solution of
/// `dV/dt = L V + λ² ∫₀ᵗ e^{(t−s)L} V_s ds`, `V_0 = id`.
pub fn semigroup_solution<T: Real>(l: &SuperOperator<T>, lambda: T, t: T) -> SuperOperator<T> {
    expm_superop(l, t).scale((lambda * t).cosh())
}
