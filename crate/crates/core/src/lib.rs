//! Memory-kernel master equations on `M_d`.
//!
//! The library builds GKSL generators and memory kernels `L_t = B_t + Z_t`,
//! integrates
//!
//! ```text
//! dA_t/dt = L A_t + ∫₀ᵗ L_{t−s} A_s ds,   A_0 = id
//! ```
//!
//! together with its normalization, series, dual and modified forms, and
//! certifies complete positivity of the resulting propagators through Choi
//! spectra. Everything is generic over the real scalar type; the `f64`
//! aliases below are what most callers want.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod generators;
pub mod laplace;
pub mod operator;
pub mod random;
pub mod scalar;
pub mod volterra;

pub use analytic::{expm_superop, f_closed_form, f_is_nonnegative, semigroup_solution, FBranch, FBranchResult};
pub use error::{Error, Result};
pub use generators::{
    gksl, kernel_at, lidar_shabani, CpFamily, GkslSpec, KernelSample, KernelSpec, LidarShabaniParams,
    ScalarKernel, Smoothness,
};
pub use laplace::{kernel_hat, laplace_of_trajectory, verify_resolvent, ResolventReport};
pub use operator::{
    adjoint, apply, certify, certify_with, choi, devec, hs_inner, pauli, vec, CpCertificate, Operator,
    SuperOperator, Thresholds, Verdict,
};
pub use scalar::Real;
pub use volterra::{
    certify_trajectory, dual, normalize_evolution, series_solve, solve_master, solve_master_right,
    solve_modified, solve_normalization, solve_semigroup_example, SolverConfig, Trajectory,
    TrajectoryCertificate, TrajectoryKind,
};

pub type Operator64 = Operator<f64>;
pub type SuperOperator64 = SuperOperator<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type CpCertificate64 = CpCertificate<f64>;
pub type SolverConfig64 = SolverConfig<f64>;

pub type Operator32 = Operator<f32>;
pub type SuperOperator32 = SuperOperator<f32>;
pub type Trajectory32 = Trajectory<f32>;
