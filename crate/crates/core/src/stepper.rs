//! Fully discrete BDF-k stepping of the collocated lifted system.
//!
//! Multiplying the lifted equation by `1 - θ` and applying BDF-k at the nodes
//! gives, per step,
//!
//! ```text
//! A Φ^{n+1} = Σ_j b_j diag(1-θ) Φ^{n-j} + Δt (θ φ₀ + f(t_{n+1}) 𝟙)
//! A = diag(α_k(1-θ_s) + Δt θ_s) + Δt λ 𝟙 wᵀ
//! ```
//!
//! `A` does not depend on `n`; it is factorized once per run.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::bdf::{bdf_coefficients, BdfScheme};
use crate::error::{Error, Result};
use crate::fmath::{abs, sqrt};
use crate::linalg::{Lu, RankOneEigen};
use crate::integrate::relaxation_integral;
use crate::problem::{FdeProblem, RhsSpec, TimeFn};
use crate::quadrature::{gauss_jacobi_grid, ThetaGrid};

/// Exact θ-state `φ(t, θ)`, used to seed the history.
pub type ExactStateFn = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;

/// How the `k - 1` values after `φ₀` are produced.
#[derive(Clone, Default)]
pub enum StartupMode {
    /// Step `n` uses BDF-n.
    #[default]
    Cascade,
    /// Each startup interval is covered by `R` BDF-1 substeps.
    Refined(usize),
    /// States taken from an exact evaluator.
    Exact(Option<ExactStateFn>),
    /// States from the exact solution of the θ-collocated system, so that
    /// startup carries no θ-discretization mismatch. Linear problems only.
    Collocated,
}

impl core::fmt::Debug for StartupMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StartupMode::Cascade => f.write_str("Cascade"),
            StartupMode::Refined(r) => write!(f, "Refined({r})"),
            StartupMode::Exact(Some(_)) => f.write_str("Exact"),
            StartupMode::Exact(None) => f.write_str("Exact(missing evaluator)"),
            StartupMode::Collocated => f.write_str("Collocated"),
        }
    }
}

/// How the step matrix is factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorStrategy {
    /// Diagonal for `λ = 0`, symmetrized eigendecomposition for `λ > 0`,
    /// LU otherwise or when the eigen route deflates.
    #[default]
    Auto,
    /// Always dense LU.
    Dense,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub startup: StartupMode,
    /// Keep every collocation vector in the trajectory.
    pub store_states: bool,
    pub factor: FactorStrategy,
    /// Advance linear problems through the Picard path.
    pub force_picard: bool,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            startup: StartupMode::Cascade,
            store_states: false,
            factor: FactorStrategy::Auto,
            force_picard: false,
            picard_tol: 1e-15,
            picard_max_iter: 100,
        }
    }
}

/// Reusable solver for `A x = r`.
#[derive(Debug, Clone)]
pub enum Factorization {
    Diagonal {
        inv: Vec<f64>,
    },
    /// `A = S⁻¹ V Λ Vᵀ S` with `S = diag(√w)`.
    Spectral {
        sqrt_w: Vec<f64>,
        inv_eig: Vec<f64>,
        eig: RankOneEigen,
    },
    Dense(Lu),
}

impl Factorization {
    pub fn kind(&self) -> &'static str {
        match self {
            Factorization::Diagonal { .. } => "diagonal",
            Factorization::Spectral { .. } => "spectral",
            Factorization::Dense(_) => "dense-lu",
        }
    }

    /// Overwrites `r` with `A⁻¹ r`.
    pub fn solve_in_place(&self, r: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            Factorization::Diagonal { inv } => {
                for (x, d) in r.iter_mut().zip(inv) {
                    *x *= d;
                }
            }
            Factorization::Spectral {
                sqrt_w,
                inv_eig,
                eig,
            } => {
                let n = r.len();
                for (x, s) in r.iter_mut().zip(sqrt_w) {
                    *x *= s;
                }
                scratch.clear();
                for i in 0..n {
                    let v = eig.vector(i);
                    let dot: f64 = v.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
                    scratch.push(dot * inv_eig[i]);
                }
                r.fill(0.0);
                for i in 0..n {
                    let c = scratch[i];
                    for (x, v) in r.iter_mut().zip(eig.vector(i)) {
                        *x += c * v;
                    }
                }
                for (x, s) in r.iter_mut().zip(sqrt_w) {
                    *x /= s;
                }
            }
            Factorization::Dense(lu) => lu.solve(r, scratch),
        }
    }
}

/// Step matrix, history diagonal and the factorization of one BDF order.
#[derive(Debug, Clone)]
pub struct StepSystem {
    scheme: BdfScheme,
    dt: f64,
    lambda: f64,
    /// `α_k(1-θ_s) + Δt θ_s`
    diag: Vec<f64>,
    /// `1 - θ_s`
    bdiag: Vec<f64>,
    weights: Vec<f64>,
    /// `Δt θ_s`
    dt_theta: Vec<f64>,
    factor: Factorization,
}

impl StepSystem {
    pub fn scheme(&self) -> &BdfScheme {
        &self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Diagonal of `B_j / b_j`.
    pub fn bdiag(&self) -> &[f64] {
        &self.bdiag
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// The error estimates assume `Δt < 1`.
    pub fn dt_exceeds_theory(&self) -> bool {
        self.dt >= 1.0
    }

    /// Dense row-major `A`.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.diag.len();
        let rho = self.dt * self.lambda;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                a[r * n + c] = rho * self.weights[c];
            }
            a[r * n + r] += self.diag[r];
        }
        a
    }

    /// Overwrites `r` with `A⁻¹ r`.
    pub fn solve_in_place(&self, r: &mut [f64], scratch: &mut Vec<f64>) {
        self.factor.solve_in_place(r, scratch)
    }

    /// `Σ_j b_j (1-θ_s) Φ^{n-j}_s + Δt θ_s φ₀`, i.e. the right-hand side
    /// without the forcing term. `past[j]` is `Φ^{n-j}`.
    fn history_rhs(&self, past: &[&[f64]], phi0: f64, out: &mut [f64]) {
        for (o, &dth) in out.iter_mut().zip(&self.dt_theta) {
            *o = dth * phi0;
        }
        for (&bj, p) in self.scheme.b().iter().zip(past) {
            for ((o, &x), &bd) in out.iter_mut().zip(p.iter()).zip(&self.bdiag) {
                *o += bj * bd * x;
            }
        }
    }
}

pub fn assemble_system(
    grid: &ThetaGrid,
    scheme: BdfScheme,
    dt: f64,
    lambda: f64,
    strategy: FactorStrategy,
) -> Result<StepSystem> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            param: "dt",
            value: dt,
            expected: "(0, ∞)",
        });
    }
    if !lambda.is_finite() {
        return Err(Error::Domain {
            param: "lambda",
            value: lambda,
            expected: "finite",
        });
    }
    let ak = scheme.alpha_k();
    let bdiag: Vec<f64> = grid.nodes().iter().map(|&th| 1.0 - th).collect();
    let dt_theta: Vec<f64> = grid.nodes().iter().map(|&th| dt * th).collect();
    let diag: Vec<f64> = bdiag
        .iter()
        .zip(&dt_theta)
        .map(|(&b, &dth)| ak * b + dth)
        .collect();
    let weights = grid.weights().to_vec();
    let mut system = StepSystem {
        scheme,
        dt,
        lambda,
        diag,
        bdiag,
        weights,
        dt_theta,
        factor: Factorization::Diagonal { inv: Vec::new() },
    };
    system.factor = factorize(&system, strategy)?;
    Ok(system)
}

fn factorize(system: &StepSystem, strategy: FactorStrategy) -> Result<Factorization> {
    let rho = system.dt * system.lambda;
    let n = system.diag.len();
    if strategy == FactorStrategy::Auto {
        if rho == 0.0 {
            return Ok(Factorization::Diagonal {
                inv: system.diag.iter().map(|d| 1.0 / d).collect(),
            });
        }
        if rho > 0.0 {
            let sqrt_w: Vec<f64> = system.weights.iter().map(|&w| sqrt(w)).collect();
            if let Ok(eig) = RankOneEigen::new(&system.diag, &sqrt_w, rho) {
                // Eigenvalues exceed min(diag) > 0.
                let inv_eig = eig.eigenvalues().iter().map(|l| 1.0 / l).collect();
                return Ok(Factorization::Spectral {
                    sqrt_w,
                    inv_eig,
                    eig,
                });
            }
        }
    }
    let a = system.matrix();
    let lu = Lu::new(n, a)?;
    Ok(Factorization::Dense(lu))
}

/// Borrowed history `[Φ^n, Φ^{n-1}, ...]`, at most five vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Past<'a> {
    items: [&'a [f64]; 5],
    len: usize,
}

impl<'a> Past<'a> {
    fn push(&mut self, v: &'a [f64]) {
        self.items[self.len] = v;
        self.len += 1;
    }
}

impl<'a> core::ops::Deref for Past<'a> {
    type Target = [&'a [f64]];

    fn deref(&self) -> &Self::Target {
        &self.items[..self.len]
    }
}

/// Ring buffer of the most recent collocation vectors.
#[derive(Debug, Clone)]
pub struct SolverState {
    width: usize,
    capacity: usize,
    buf: Vec<f64>,
    count: usize,
    /// Slot of the newest vector.
    head: usize,
    n: usize,
    t: f64,
}

impl SolverState {
    /// Buffer of `capacity` vectors of length `width` holding `initial` as `Φ^0`.
    pub fn new(width: usize, capacity: usize, initial: &[f64]) -> Self {
        let mut buf = vec![0.0; width * capacity];
        buf[..width].copy_from_slice(initial);
        SolverState {
            width,
            capacity,
            buf,
            count: 1,
            head: 0,
            n: 0,
            t: 0.0,
        }
    }

    /// `Φ^{n-j}`.
    pub fn get(&self, j: usize) -> &[f64] {
        assert!(j < self.count, "history holds {} vectors", self.count);
        let slot = (self.head + self.capacity - j) % self.capacity;
        &self.buf[slot * self.width..(slot + 1) * self.width]
    }

    /// `[Φ^n, Φ^{n-1}, ...]`, at most `count` entries.
    pub fn past(&self, count: usize) -> Past<'_> {
        let mut past = Past::default();
        for j in 0..count.min(self.count) {
            past.push(self.get(j));
        }
        past
    }

    /// Appends `Φ^{n+1}` at time `t`, dropping the oldest vector when full.
    pub fn push(&mut self, v: &[f64], t: f64) {
        self.head = (self.head + 1) % self.capacity;
        let slot = self.head;
        self.buf[slot * self.width..(slot + 1) * self.width].copy_from_slice(v);
        self.count = (self.count + 1).min(self.capacity);
        self.n += 1;
        self.t = t;
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn step_index(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Numbers held in the buffer.
    pub fn buffer_len(&self) -> usize {
        self.buf.len()
    }
}

/// Advances a linear problem by one step.
pub fn step_linear(
    state: &SolverState,
    system: &StepSystem,
    f_next: f64,
    phi0: f64,
    out: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let past = state.past(system.scheme.order());
    linear_core(&past, system, f_next, phi0, out, scratch);
}

fn linear_core(past: &[&[f64]], system: &StepSystem, f_next: f64, phi0: f64, out: &mut [f64], scratch: &mut Vec<f64>) {
    system.history_rhs(past, phi0, out);
    let dtf = system.dt * f_next;
    for o in out.iter_mut() {
        *o += dtf;
    }
    system.solve_in_place(out, scratch);
}

/// Outcome of one Picard solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardReport {
    /// Solves after the first; a right-hand side independent of φ reports 1.
    pub iterations: usize,
    pub residual: f64,
}

/// Picard iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
}

/// Advances a general problem by one step with Picard iteration lagging all
/// of `F`. Only the diagonal part of `system` is used; its `λ` is ignored.
pub fn step_nonlinear_picard(
    state: &SolverState,
    system: &StepSystem,
    grid: &ThetaGrid,
    rhs: &RhsSpec,
    t_next: f64,
    phi0: f64,
    settings: PicardSettings,
    out: &mut [f64],
) -> Result<PicardReport> {
    let past = state.past(system.scheme.order());
    picard_core(&past, system, grid, rhs, t_next, phi0, settings, out)
        .map_err(|e| with_step(e, state.step_index() + 1))
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::PicardDiverged {
            iterations,
            residual,
            ..
        } => Error::PicardDiverged {
            step,
            iterations,
            residual,
        },
        other => other,
    }
}

#[allow(clippy::too_many_arguments)]
/// Residuals below this many ulps of `max(1, |φ̂|)` are rounding noise.
const ROUNDING_FLOOR: f64 = 64.0 * f64::EPSILON;

fn picard_core(
    past: &[&[f64]],
    system: &StepSystem,
    grid: &ThetaGrid,
    rhs: &RhsSpec,
    t_next: f64,
    phi0: f64,
    settings: PicardSettings,
    out: &mut [f64],
) -> Result<PicardReport> {
    system.history_rhs(past, phi0, out);
    // Φ^{(l+1)} = (base + Δt F(φ̂^{(l)})) / diag, so the reconstruction is
    // affine in F: φ̂^{(l+1)} = p + q F.
    let w = grid.weights();
    let mut p = 0.0;
    let mut q = 0.0;
    for s in 0..out.len() {
        p += w[s] * out[s] / system.diag[s];
        q += w[s] * system.dt / system.diag[s];
    }
    let mut current = grid.apply(past[0]);
    let mut residual = f64::INFINITY;
    for l in 0..settings.max_iter.max(1) {
        let forcing = rhs.eval(t_next, current);
        let next = p + q * forcing;
        let previous = residual;
        residual = abs(next - current);
        current = next;
        // An absolute tolerance below the rounding floor of |φ̂| cannot be met;
        // a residual that stops shrinking at that floor is accepted.
        let stalled = residual <= ROUNDING_FLOOR * current.abs().max(1.0) && residual >= previous;
        if residual <= settings.tol || stalled {
            for (o, d) in out.iter_mut().zip(&system.diag) {
                *o = (*o + system.dt * forcing) / d;
            }
            return Ok(PicardReport {
                iterations: l,
                residual,
            });
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(Error::PicardDiverged {
        step: 0,
        iterations: settings.max_iter,
        residual,
    })
}

/// Exact solution of the θ-collocated linear system
///
/// ```text
/// Φ' = -(C + λ c₀ wᵀ) Φ + C φ₀ 𝟙 + c₀ f(t),   C = diag(c₁(θ_s))
/// ```
///
/// `S = diag(√(w(1-θ)))` symmetrizes `K = C + λ c₀ wᵀ` into
/// `C + λ u uᵀ` with `u = √(w c₀)`, so with `K = S⁻¹VΛVᵀS`
///
/// ```text
/// Φ(t) - φ₀ = S⁻¹ V [ (Vᵀu)_i ∫₀^t e^{-Λ_i(t-τ)} (f(τ) - λφ₀) dτ ]_i
/// ```
pub struct CollocatedLinear {
    phi0: f64,
    lambda: f64,
    forcing: TimeFn,
    inv_s: Vec<f64>,
    eig: RankOneEigen,
    coef: Vec<f64>,
}

impl CollocatedLinear {
    pub fn new(problem: &FdeProblem, grid: &ThetaGrid) -> Result<Self> {
        let RhsSpec::Linear { lambda, forcing } = problem.rhs() else {
            return Err(Error::Unsupported("collocated startup needs a linear right-hand side"));
        };
        let c: Vec<f64> = grid.nodes().iter().map(|&th| th / (1.0 - th)).collect();
        let s: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(&th, &w)| sqrt(w * (1.0 - th)))
            .collect();
        let u: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(&th, &w)| sqrt(w / (1.0 - th)))
            .collect();
        let eig = RankOneEigen::new(&c, &u, *lambda)
            .map_err(|_| Error::Unsupported("collocated startup: rank-one coupling deflates"))?;
        let coef = (0..u.len())
            .map(|i| eig.vector(i).iter().zip(&u).map(|(v, u)| v * u).sum())
            .collect();
        Ok(CollocatedLinear {
            phi0: problem.phi0(),
            lambda: *lambda,
            forcing: forcing.clone(),
            inv_s: s.iter().map(|x| 1.0 / x).collect(),
            eig,
            coef,
        })
    }

    /// Writes `Φ(t)` into `out`.
    pub fn state(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let g = |tau: f64| (self.forcing)(tau) - self.lambda * self.phi0;
        for (i, (&mu, &coef)) in self.eig.eigenvalues().iter().zip(&self.coef).enumerate() {
            let amp = coef * relaxation_integral(mu, t, g);
            for (o, v) in out.iter_mut().zip(self.eig.vector(i)) {
                *o += amp * v;
            }
        }
        for (o, is) in out.iter_mut().zip(&self.inv_s) {
            *o = self.phi0 + *o * is;
        }
    }
}

/// Per-run counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Largest number of `f64` values held between steps.
    pub peak_state_len: usize,
    pub picard_iterations_total: usize,
    pub picard_iterations_max: usize,
    pub factorization: &'static str,
}

/// Result of a full march.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    /// `states[n]` is `Φ^n` when requested.
    pub states: Option<Vec<Vec<f64>>>,
    pub stats: SolveStats,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_phi(&self) -> f64 {
        *self.phi.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Incremental solver: one call to [`Solver::step`] per time step, startup
/// included.
pub struct Solver {
    problem: FdeProblem,
    grid: ThetaGrid,
    k: usize,
    n_steps: usize,
    dt: f64,
    options: SolveOptions,
    /// `systems[p - 1]` is the BDF-p system at `Δt`, for the orders in use.
    systems: Vec<Option<StepSystem>>,
    substep: Option<StepSystem>,
    collocated: Option<CollocatedLinear>,
    picard: bool,
    state: SolverState,
    work: Vec<f64>,
    scratch: Vec<f64>,
    sub: Vec<f64>,
    phi: f64,
    stats: SolveStats,
}

impl Solver {
    /// `m` is the highest node index, `k` the BDF order and `n_steps` the
    /// number of uniform steps over the horizon.
    pub fn new(problem: &FdeProblem, m: usize, k: usize, n_steps: usize, options: SolveOptions) -> Result<Self> {
        let grid = gauss_jacobi_grid(m, problem.alpha())?;
        Self::with_grid(problem, grid, k, n_steps, options)
    }

    pub fn with_grid(
        problem: &FdeProblem,
        grid: ThetaGrid,
        k: usize,
        n_steps: usize,
        options: SolveOptions,
    ) -> Result<Self> {
        bdf_coefficients(k)?;
        if n_steps < k {
            return Err(Error::TooFewSteps {
                steps: n_steps,
                order: k,
            });
        }
        if grid.alpha() != problem.alpha() {
            return Err(Error::Domain {
                param: "grid alpha",
                value: grid.alpha(),
                expected: "the problem's alpha",
            });
        }
        if let StartupMode::Exact(None) = options.startup {
            if k > 1 {
                return Err(Error::MissingExactState);
            }
        }
        if let StartupMode::Refined(r) = options.startup {
            if r == 0 {
                return Err(Error::Domain {
                    param: "refinement",
                    value: 0.0,
                    expected: "at least 1",
                });
            }
        }
        let dt = problem.horizon() / n_steps as f64;
        let picard = options.force_picard || matches!(problem.rhs(), RhsSpec::Nonlinear { .. });
        let lambda = match problem.rhs() {
            RhsSpec::Linear { lambda, .. } if !picard => *lambda,
            _ => 0.0,
        };
        let mut systems = Vec::with_capacity(k);
        for p in 1..=k {
            let needed = p == k || matches!(options.startup, StartupMode::Cascade);
            systems.push(if needed {
                Some(assemble_system(&grid, bdf_coefficients(p)?, dt, lambda, options.factor)?)
            } else {
                None
            });
        }
        let substep = match options.startup {
            StartupMode::Refined(r) if k > 1 => Some(assemble_system(
                &grid,
                bdf_coefficients(1)?,
                dt / r as f64,
                lambda,
                options.factor,
            )?),
            _ => None,
        };
        let collocated = match options.startup {
            StartupMode::Collocated if k > 1 => Some(CollocatedLinear::new(problem, &grid)?),
            _ => None,
        };
        let width = grid.len();
        let initial = vec![problem.phi0(); width];
        let state = SolverState::new(width, k, &initial);
        let sub = if substep.is_some() { vec![0.0; width] } else { Vec::new() };
        let stats = SolveStats {
            factorization: systems[k - 1].as_ref().unwrap().factorization().kind(),
            ..SolveStats::default()
        };
        let phi = problem.phi0();
        let mut solver = Solver {
            problem: problem.clone(),
            grid,
            k,
            n_steps,
            dt,
            options,
            systems,
            substep,
            collocated,
            picard,
            state,
            work: vec![0.0; width],
            scratch: Vec::with_capacity(width),
            sub,
            phi,
            stats,
        };
        solver.stats.peak_state_len = solver.held_len();
        Ok(solver)
    }

    fn held_len(&self) -> usize {
        self.state.buffer_len() + self.work.len() + self.sub.len() + self.scratch.capacity()
    }

    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// The BDF-k system used after startup.
    pub fn system(&self) -> &StepSystem {
        self.systems[self.k - 1].as_ref().unwrap()
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Latest collocation vector.
    pub fn current(&self) -> &[f64] {
        self.state.get(0)
    }

    /// Latest reconstructed value.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn time(&self) -> f64 {
        self.state.time()
    }

    pub fn step_index(&self) -> usize {
        self.state.step_index()
    }

    pub fn is_done(&self) -> bool {
        self.state.step_index() >= self.n_steps
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    fn time_at(&self, n: usize) -> f64 {
        self.problem.horizon() * n as f64 / self.n_steps as f64
    }

    fn picard_settings(&self) -> PicardSettings {
        PicardSettings {
            tol: self.options.picard_tol,
            max_iter: self.options.picard_max_iter,
        }
    }

    /// Advances one step and returns the reconstructed value.
    pub fn step(&mut self) -> Result<f64> {
        if self.is_done() {
            return Ok(self.phi);
        }
        let n = self.state.step_index();
        let t_next = self.time_at(n + 1);
        let order = (n + 1).min(self.k);
        let mut work = core::mem::take(&mut self.work);
        let result = if order < self.k {
            match &self.options.startup {
                StartupMode::Cascade => self.advance(order, t_next, &mut work),
                StartupMode::Refined(r) => {
                    let r = *r;
                    self.advance_refined(r, n, &mut work)
                }
                StartupMode::Exact(Some(exact)) => work
                    .iter_mut()
                    .zip(self.grid.nodes())
                    .try_for_each(|(o, &th)| exact(t_next, th).map(|v| *o = v)),
                StartupMode::Exact(None) => Err(Error::MissingExactState),
                StartupMode::Collocated => {
                    self.collocated.as_ref().unwrap().state(t_next, &mut work);
                    Ok(())
                }
            }
        } else {
            self.advance(self.k, t_next, &mut work)
        };
        if let Err(e) = result {
            self.work = work;
            return Err(with_step(e, n + 1));
        }
        self.state.push(&work, t_next);
        self.phi = self.grid.apply(&work);
        self.work = work;
        self.stats.peak_state_len = self.stats.peak_state_len.max(self.held_len());
        Ok(self.phi)
    }

    fn advance(&mut self, order: usize, t_next: f64, out: &mut [f64]) -> Result<()> {
        let system = self.systems[order - 1].as_ref().unwrap();
        let past = self.state.past(order);
        let phi0 = self.problem.phi0();
        if self.picard {
            let report = picard_core(&past, system, &self.grid, self.problem.rhs(), t_next, phi0, self.picard_settings(), out)?;
            self.stats.picard_iterations_total += report.iterations;
            self.stats.picard_iterations_max = self.stats.picard_iterations_max.max(report.iterations);
        } else {
            let f_next = match self.problem.rhs() {
                RhsSpec::Linear { forcing, .. } => forcing(t_next),
                RhsSpec::Nonlinear { .. } => unreachable!("nonlinear problems use Picard"),
            };
            linear_core(&past, system, f_next, phi0, out, &mut self.scratch);
        }
        Ok(())
    }

    /// BDF-1 substeps over `[t_n, t_{n+1}]`.
    fn advance_refined(&mut self, r: usize, n: usize, out: &mut [f64]) -> Result<()> {
        let system = self.substep.as_ref().unwrap();
        let phi0 = self.problem.phi0();
        let t_n = self.time_at(n);
        let h = self.dt / r as f64;
        let mut sub = core::mem::take(&mut self.sub);
        sub.copy_from_slice(self.state.get(0));
        for i in 1..=r {
            let t = t_n + h * i as f64;
            let past = [&sub[..]];
            if self.picard {
                let report = picard_core(&past, system, &self.grid, self.problem.rhs(), t, phi0, self.picard_settings(), out)?;
                self.stats.picard_iterations_total += report.iterations;
                self.stats.picard_iterations_max = self.stats.picard_iterations_max.max(report.iterations);
            } else {
                let f_next = match self.problem.rhs() {
                    RhsSpec::Linear { forcing, .. } => forcing(t),
                    RhsSpec::Nonlinear { .. } => unreachable!("nonlinear problems use Picard"),
                };
                linear_core(&past, system, f_next, phi0, out, &mut self.scratch);
            }
            sub.copy_from_slice(out);
        }
        self.sub = sub;
        Ok(())
    }
}

/// Marches `problem` over `n_steps` uniform steps with BDF-`k` on `M + 1`
/// nodes.
pub fn solve(problem: &FdeProblem, m: usize, k: usize, n_steps: usize, options: &SolveOptions) -> Result<Trajectory> {
    let store = options.store_states;
    let mut solver = Solver::new(problem, m, k, n_steps, options.clone())?;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut phi = Vec::with_capacity(n_steps + 1);
    let mut states = store.then(|| vec![solver.current().to_vec()]);
    times.push(0.0);
    phi.push(solver.phi());
    while !solver.is_done() {
        let value = solver.step()?;
        times.push(solver.time());
        phi.push(value);
        if let Some(states) = states.as_mut() {
            states.push(solver.current().to_vec());
        }
    }
    Ok(Trajectory {
        times,
        phi,
        states,
        stats: solver.stats.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::CaseId;
    use crate::fmath::tgamma;
    use crate::mittag_leffler::ml;
    use crate::oracles::frac_adams_solve;
    use proptest::prelude::*;

    fn grid(m: usize, alpha: f64) -> ThetaGrid {
        gauss_jacobi_grid(m, alpha).unwrap()
    }

    fn system(g: &ThetaGrid, k: usize, dt: f64, lambda: f64, strategy: FactorStrategy) -> StepSystem {
        assemble_system(g, bdf_coefficients(k).unwrap(), dt, lambda, strategy).unwrap()
    }

    /// Deterministic values in [-1, 1).
    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    #[test]
    fn single_node_matrices() {
        let g = grid(0, 0.5);
        let s = system(&g, 1, 0.1, 0.0, FactorStrategy::Auto);
        assert!((s.matrix()[0] - 0.55).abs() < 1e-15);
        assert!((s.bdiag()[0] - 0.5).abs() < 1e-15);
        let s = system(&g, 1, 0.1, 2.0, FactorStrategy::Auto);
        assert!((s.matrix()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_lambda_gives_diagonal_matrix() {
        let g = grid(6, 0.3);
        let s = system(&g, 3, 0.02, 0.0, FactorStrategy::Auto);
        assert_eq!(s.factorization().kind(), "diagonal");
        let a = s.matrix();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if i != j {
                    assert_eq!(a[i * g.len() + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn factorization_round_trip() {
        for &(m, lambda) in &[(2usize, 1.0), (10, 5.0), (30, 1.0), (30, 100.0), (8, -3.0)] {
            let g = grid(m, 0.6);
            for strategy in [FactorStrategy::Auto, FactorStrategy::Dense] {
                let s = system(&g, 2, 0.01, lambda, strategy);
                let a = s.matrix();
                let mut scratch = Vec::new();
                for seed in 0..100 {
                    let x = noise(g.len(), seed);
                    let mut r = matvec(&a, &x);
                    s.solve_in_place(&mut r, &mut scratch);
                    let err = r.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    assert!(err <= 1e-12 * scale, "M {m} λ {lambda} {strategy:?}: {err}");
                }
            }
        }
        let g = grid(5, 0.6);
        assert_eq!(system(&g, 1, 0.01, 1.0, FactorStrategy::Auto).factorization().kind(), "spectral");
        assert_eq!(system(&g, 1, 0.01, -1.0, FactorStrategy::Auto).factorization().kind(), "dense-lu");
    }

    #[test]
    fn step_matrix_spectrum_is_positive() {
        for &lambda in &[0.5, 1.0, 10.0, 1e3] {
            let g = grid(30, 0.4);
            let s = system(&g, 4, 0.01, lambda, FactorStrategy::Auto);
            let Factorization::Spectral { eig, .. } = s.factorization() else {
                panic!("expected the spectral factorization");
            };
            assert!(eig.eigenvalues().iter().all(|&l| l > 0.0));
            // Trace is preserved by the similarity.
            let trace: f64 = eig.eigenvalues().iter().sum();
            let want: f64 = s.matrix().iter().step_by(g.len() + 1).sum();
            assert!((trace - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn scalar_step_by_hand() {
        let g = grid(0, 0.5);
        let s = system(&g, 1, 0.1, 0.0, FactorStrategy::Auto);
        let state = SolverState::new(1, 1, &[0.0]);
        let mut out = [0.0];
        step_linear(&state, &s, tgamma(1.5), 0.0, &mut out, &mut Vec::new());
        let want = 0.1 * tgamma(1.5) / 0.55;
        assert!((out[0] - want).abs() < 1e-16);
        assert!((out[0] - 0.161_132_2).abs() < 1e-7);
    }

    #[test]
    fn steady_state_is_preserved() {
        let p = FdeProblem::new(0.35, 3.0, 1.0, RhsSpec::linear(0.0, |_| 0.0)).unwrap();
        for k in 1..=5 {
            let tr = solve(&p, 12, k, 50, &SolveOptions::default()).unwrap();
            assert!(tr.phi.iter().all(|&v| (v - 3.0).abs() <= 1e-13), "k {k}");
        }
    }

    #[test]
    fn case_two_decays_in_first_step() {
        let p = CaseId::II.problem(0.5, None, 1.0).unwrap();
        for m in [0, 5, 30] {
            let tr = solve(&p, m, 1, 100, &SolveOptions::default()).unwrap();
            assert!(tr.phi[1] < 1.0);
        }
        assert!(frac_adams_solve(&p, 100).unwrap().phi[1] < 1.0);
    }

    #[test]
    fn picard_with_state_independent_rhs_takes_one_iteration() {
        let g = grid(4, 0.5);
        let s = system(&g, 1, 0.1, 0.0, FactorStrategy::Auto);
        let state = SolverState::new(g.len(), 1, &vec![0.0; g.len()]);
        let rhs = RhsSpec::nonlinear(|t, _| 1.0 + t);
        let mut out = vec![0.0; g.len()];
        let settings = PicardSettings { tol: 1e-15, max_iter: 100 };
        let report = step_nonlinear_picard(&state, &s, &g, &rhs, 0.1, 0.0, settings, &mut out).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(report.residual, 0.0);
    }

    #[test]
    fn picard_matches_scalar_fixed_point() {
        // M = 0: θ₀ = 1/2, ω₀ = 1, so Φ¹ = (0.5 + 0.01(0.5 - Φ¹³)) / 0.505.
        let g = grid(0, 0.5);
        let s = system(&g, 1, 0.01, 0.0, FactorStrategy::Auto);
        let state = SolverState::new(1, 1, &[1.0]);
        let rhs = RhsSpec::nonlinear(|_, phi| -phi * phi * phi);
        let mut out = [0.0];
        let settings = PicardSettings { tol: 1e-15, max_iter: 100 };
        step_nonlinear_picard(&state, &s, &g, &rhs, 0.01, 1.0, settings, &mut out).unwrap();
        let mut x = 1.0f64;
        for _ in 0..200 {
            x = (0.5 + 0.01 * (0.5 - x * x * x)) / 0.505;
        }
        assert!((out[0] - x).abs() < 1e-14, "{} vs {x}", out[0]);
    }

    #[test]
    fn picard_on_linear_problem_matches_linear_step() {
        let g = grid(8, 0.7);
        let (dt, lambda) = (0.01, 1.0);
        let linear = system(&g, 2, dt, lambda, FactorStrategy::Auto);
        let lagged = system(&g, 2, dt, 0.0, FactorStrategy::Auto);
        let mut state = SolverState::new(g.len(), 2, &vec![1.0; g.len()]);
        let prev: Vec<f64> = g.nodes().iter().map(|th| 1.0 - 0.01 * th).collect();
        state.push(&prev, dt);
        let mut a = vec![0.0; g.len()];
        step_linear(&state, &linear, 0.0, 1.0, &mut a, &mut Vec::new());
        let rhs = RhsSpec::nonlinear(move |_, phi| -lambda * phi);
        let mut b = vec![0.0; g.len()];
        let settings = PicardSettings { tol: 1e-15, max_iter: 100 };
        step_nonlinear_picard(&state, &lagged, &g, &rhs, 2.0 * dt, 1.0, settings, &mut b).unwrap();
        let (pa, pb) = (g.apply(&a), g.apply(&b));
        assert!((pa - pb).abs() <= 1e-14, "{pa} vs {pb}");
    }

    #[test]
    fn picard_failure_carries_step_and_residual() {
        let p = CaseId::IV.problem(0.3, None, 1.0).unwrap();
        match solve(&p, 30, 4, 40, &SolveOptions::default()) {
            Err(Error::PicardDiverged { step, iterations, residual }) => {
                assert!(step >= 1 && step <= 40);
                assert_eq!(iterations, 100);
                assert!(residual > 1e-15);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn first_order_startup_is_a_no_op() {
        let p = CaseId::II.problem(0.5, None, 1.0).unwrap();
        let solver = Solver::new(&p, 6, 1, 10, SolveOptions::default()).unwrap();
        assert_eq!(solver.state().len(), 1);
        assert!(solver.current().iter().all(|&v| v == 1.0));
        assert_eq!(solver.phi(), 1.0);
    }

    #[test]
    fn cascade_uses_lower_orders() {
        let p = CaseId::I.problem(0.5, None, 1.0).unwrap();
        let g = grid(6, 0.5);
        let n = 20;
        let dt = 1.0 / n as f64;
        let f = tgamma(1.5);
        let mut solver = Solver::new(&p, 6, 3, n, SolveOptions::default()).unwrap();
        let mut state = SolverState::new(g.len(), 3, &vec![0.0; g.len()]);
        let mut out = vec![0.0; g.len()];
        for (order, step) in [(1, 1), (2, 2), (3, 3)] {
            let s = system(&g, order, dt, 0.0, FactorStrategy::Auto);
            step_linear(&state, &s, f, 0.0, &mut out, &mut Vec::new());
            state.push(&out, step as f64 * dt);
            solver.step().unwrap();
            for (a, b) in solver.current().iter().zip(&out) {
                assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn refined_startup_converges_with_substeps() {
        let p = CaseId::II.problem(0.8, None, 1.0).unwrap();
        let at = |startup: StartupMode| {
            let tr = solve(&p, 30, 5, 40, &SolveOptions { startup, ..Default::default() }).unwrap();
            (tr.phi[4] - ml(0.8, -crate::fmath::powf(tr.times[4], 0.8)).unwrap()).abs()
        };
        let coarse = at(StartupMode::Refined(16));
        let fine = at(StartupMode::Refined(64));
        // BDF-1 substeps: error falls like 1/R.
        assert!(fine < 0.3 * coarse, "{coarse} {fine}");
        assert!(fine < 1e-4);
        // The semi-discrete state itself is this close at t = 0.1 with M = 30.
        assert!(at(StartupMode::Collocated) < 2e-7);
    }

    #[test]
    fn exact_startup_needs_a_callback() {
        let p = CaseId::II.problem(0.5, None, 1.0).unwrap();
        let opts = SolveOptions {
            startup: StartupMode::Exact(None),
            ..Default::default()
        };
        assert_eq!(Solver::new(&p, 4, 3, 10, opts.clone()).err(), Some(Error::MissingExactState));
        assert!(Solver::new(&p, 4, 1, 10, opts).is_ok());
        assert!(matches!(
            solve(&p, 4, 3, 2, &SolveOptions::default()),
            Err(Error::TooFewSteps { steps: 2, order: 3 })
        ));
    }

    #[test]
    fn exact_and_collocated_startups_agree_for_case_one() {
        let p = CaseId::I.problem(0.4, None, 1.0).unwrap();
        let exact = StartupMode::Exact(Some(Arc::new(|t, th| CaseId::I.exact_state(0.4, None, t, th))));
        let a = solve(&p, 10, 4, 20, &SolveOptions { startup: exact, ..Default::default() }).unwrap();
        let b = solve(&p, 10, 4, 20, &SolveOptions { startup: StartupMode::Collocated, ..Default::default() }).unwrap();
        for (x, y) in a.phi.iter().zip(&b.phi) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn solutions_approach_closed_forms() {
        let p = CaseId::I.problem(0.5, None, 1.0).unwrap();
        let e1 = (solve(&p, 30, 2, 50, &SolveOptions::default()).unwrap().final_phi() - 1.0).abs();
        let e2 = (solve(&p, 30, 2, 200, &SolveOptions::default()).unwrap().final_phi() - 1.0).abs();
        assert!(e2 < e1 / 8.0 && e2 < 1e-5, "{e1} {e2}");

        let p = CaseId::II.problem(0.8, None, 1.0).unwrap();
        let tr = solve(&p, 30, 3, 400, &SolveOptions::default()).unwrap();
        assert_eq!(tr.phi[0], 1.0);
        assert_eq!(tr.final_time(), 1.0);
        assert!((tr.final_phi() - ml(0.8, -1.0).unwrap()).abs() < 5e-6);
    }

    #[test]
    fn state_buffer_does_not_grow_with_steps() {
        let p = CaseId::II.problem(0.5, None, 1.0).unwrap();
        let a = solve(&p, 30, 3, 100, &SolveOptions::default()).unwrap();
        let b = solve(&p, 30, 3, 1000, &SolveOptions::default()).unwrap();
        assert_eq!(a.stats.peak_state_len, b.stats.peak_state_len);
        assert!(a.states.is_none());
        let c = solve(&p, 5, 3, 10, &SolveOptions { store_states: true, ..Default::default() }).unwrap();
        assert_eq!(c.states.as_ref().unwrap().len(), 11);
    }

    #[test]
    fn ring_buffer_order() {
        let mut s = SolverState::new(1, 3, &[0.0]);
        for i in 1..=5 {
            s.push(&[i as f64], i as f64);
        }
        assert_eq!(s.len(), 3);
        assert_eq!(s.get(0), &[5.0]);
        assert_eq!(s.get(2), &[3.0]);
        assert_eq!(s.past(2).len(), 2);
        assert_eq!(s.step_index(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn constant_trajectory(k in 1usize..=5, m in 0usize..20, n in 5usize..40, phi0 in -5.0f64..5.0) {
            let p = FdeProblem::new(0.5, phi0, 1.0, RhsSpec::linear(0.0, |_| 0.0)).unwrap();
            let tr = solve(&p, m, k, n, &SolveOptions::default()).unwrap();
            for v in tr.phi {
                prop_assert!((v - phi0).abs() <= 1e-13 * phi0.abs().max(1.0));
            }
        }

        #[test]
        fn round_trip_any_grid(m in 0usize..25, lambda in 0.0f64..50.0, dt in 1e-4f64..0.5, alpha in 0.05f64..0.95) {
            let g = grid(m, alpha);
            let s = system(&g, 3, dt, lambda, FactorStrategy::Auto);
            let a = s.matrix();
            let x = noise(g.len(), m as u64);
            let mut r = matvec(&a, &x);
            let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            s.solve_in_place(&mut r, &mut Vec::new());
            let back = matvec(&a, &r);
            let res = back.iter().zip(matvec(&a, &x)).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-12 * norm_r);
        }
    }
}
