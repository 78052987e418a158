//! Solver core for Caputo time-fractional ODEs
//!
//! ```text
//! d^α φ/dt^α = F(t, φ),   φ(0) = φ₀,   0 < α < 1
//! ```
//!
//! The fractional problem is lifted to an integer-order family of ODEs in an
//! auxiliary variable θ ∈ (0, 1):
//!
//! ```text
//! ∂φ(t,θ)/∂t + c₁(θ) φ(t,θ) = c₀(θ) F(t, C[φ](t)) + c₁(θ) φ₀,   φ(0,θ) = φ₀
//! C[φ](t) = ∫₀¹ φ(t,θ) ω_α(θ) dθ
//! ```
//!
//! with `c₀ = 1/(1-θ)`, `c₁ = θ/(1-θ)` and the Jacobi-type weight
//! `ω_α = θ^{-α}(1-θ)^{α-1} / (Γ(1-α)Γ(α))`. Collocating θ at Gauss-Jacobi
//! nodes turns the memory term into `M+1` coupled ODEs, which are advanced with
//! BDF-k using one factorization of the step matrix for the whole run. Cost is
//! linear in the number of steps and the state held between steps is `k(M+1)`
//! numbers regardless of the horizon.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line and
//! timing live in the companion `epde-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub(crate) mod fmath;

pub mod bdf;
pub mod cases;
pub mod integrate;
pub mod linalg;
pub mod mittag_leffler;
pub mod oracles;
pub mod problem;
pub mod quadrature;
pub mod stability;
pub mod stepper;

pub use bdf::{bdf_coefficients, BdfScheme};
pub use cases::CaseId;
pub use error::{Error, Issue, Result};
pub use mittag_leffler::{exact_solution, ml};
pub use problem::{theta_coefficients, validate_problem, FdeProblem, ProblemSpec, RhsSpec, ThetaCoeffs};
pub use quadrature::{gauss_jacobi_grid, jacobi_recurrence, reconstruct, ThetaGrid};
pub use stability::{amplification_matrix, region_scan, spectral_radius, CMatrix, RegionField, RegionSpec, StabilityModel};
pub use stepper::{solve, SolveOptions, Solver, StartupMode, Trajectory};
