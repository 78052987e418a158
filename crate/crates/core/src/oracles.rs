//! Direct-convolution reference solvers.
//!
//! Both keep the whole history and pay `O(n)` work at step `n`. They share no
//! code with the θ-collocation path so that agreement between the two is
//! evidence about each.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{powf, tgamma};
use crate::problem::{FdeProblem, RhsSpec};
use crate::stepper::{SolveStats, Trajectory};

fn uniform_times(horizon: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::TooFewSteps { steps: 0, order: 1 });
    }
    let dt = horizon / n as f64;
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

fn finish(times: Vec<f64>, phi: Vec<f64>) -> Trajectory {
    let stats = SolveStats {
        peak_state_len: phi.len(),
        factorization: "none",
        ..SolveStats::default()
    };
    Trajectory {
        times,
        phi,
        states: None,
        stats,
    }
}

/// Implicit L1 scheme for a linear right-hand side.
///
/// `D^α φ(t_{n+1}) ≈ Δt^{-α}/Γ(2-α) Σ_{j=0}^{n} a_j (φ^{n+1-j} - φ^{n-j})`
/// with `a_j = (j+1)^{1-α} - j^{1-α}`; exact for piecewise-linear `φ`.
pub fn l1_solve(problem: &FdeProblem, n: usize) -> Result<Trajectory> {
    let RhsSpec::Linear { lambda, forcing } = problem.rhs() else {
        return Err(Error::Unsupported("the L1 oracle needs a linear right-hand side"));
    };
    let alpha = problem.alpha();
    let times = uniform_times(problem.horizon(), n)?;
    let dt = times[1];
    let a: Vec<f64> = (0..n)
        .map(|j| powf(j as f64 + 1.0, 1.0 - alpha) - powf(j as f64, 1.0 - alpha))
        .collect();
    let scale = powf(dt, -alpha) / tgamma(2.0 - alpha);
    let mut phi = vec![problem.phi0(); n + 1];
    for step in 0..n {
        // Memory part: Σ_{j=1}^{step} a_j (φ^{step+1-j} - φ^{step-j})
        let memory: f64 = (1..=step).map(|j| a[j] * (phi[step + 1 - j] - phi[step - j])).sum();
        let rhs = forcing(times[step + 1]) + scale * (phi[step] - memory);
        phi[step + 1] = rhs / (scale + lambda);
    }
    Ok(finish(times, phi))
}

/// Fractional Adams predictor-corrector on
/// `φ(t) = φ₀ + Γ(α)⁻¹ ∫₀^t (t-s)^{α-1} F(s, φ(s)) ds`: product rectangle
/// predictor, product trapezoid corrector, one corrector sweep per step.
pub fn frac_adams_solve(problem: &FdeProblem, n: usize) -> Result<Trajectory> {
    let alpha = problem.alpha();
    let phi0 = problem.phi0();
    let rhs = problem.rhs();
    let times = uniform_times(problem.horizon(), n)?;
    let dt = times[1];
    let ha = powf(dt, alpha);
    let pred_scale = ha / tgamma(alpha + 1.0);
    let corr_scale = ha / tgamma(alpha + 2.0);

    // pw[i] = (i+1)^α - i^α; qw[i] = (i+2)^{α+1} + i^{α+1} - 2(i+1)^{α+1}
    let pw: Vec<f64> = (0..n)
        .map(|i| powf(i as f64 + 1.0, alpha) - powf(i as f64, alpha))
        .collect();
    let qw: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64;
            powf(x + 2.0, alpha + 1.0) + powf(x, alpha + 1.0) - 2.0 * powf(x + 1.0, alpha + 1.0)
        })
        .collect();

    let mut phi = Vec::with_capacity(n + 1);
    let mut f = Vec::with_capacity(n + 1);
    phi.push(phi0);
    f.push(rhs.eval(0.0, phi0));
    for step in 0..n {
        let ns = step as f64;
        let t_next = times[step + 1];
        let predictor = phi0 + pred_scale * (0..=step).map(|j| pw[step - j] * f[j]).sum::<f64>();
        let start = powf(ns, alpha + 1.0) - (ns - alpha) * powf(ns + 1.0, alpha);
        let history = start * f[0] + (1..=step).map(|j| qw[step - j] * f[j]).sum::<f64>();
        let value = phi0 + corr_scale * (rhs.eval(t_next, predictor) + history);
        phi.push(value);
        f.push(rhs.eval(t_next, value));
    }
    Ok(finish(times, phi))
}
