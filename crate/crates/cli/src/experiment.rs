//! Solver runs, convergence tables and region scans behind the subcommands.

use std::fmt;
use std::time::{Duration, Instant};

use epde_core::stability::{scan_row, RadiusMethod};
use epde_core::{solve, FdeProblem, RegionField, RegionSpec, SolveOptions, Trajectory};
use rayon::prelude::*;

use crate::config::{self, Norm, ProblemConfig, Settings, StartupChoice, PROBLEM_KEYS};
use crate::error::{CliError, Result};

/// Refinement of the self-reference run relative to the finest step.
pub const SELF_REFERENCE_REFINEMENT: usize = 16;
/// Extra collocation nodes of the self-reference run.
pub const SELF_REFERENCE_EXTRA_NODES: usize = 10;
/// Rows used by the least-squares order fit.
pub const FIT_ROWS: usize = 4;

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    PROBLEM_KEYS.iter().chain(extra).copied().collect()
}

fn order(s: &Settings) -> Result<usize> {
    Ok(s.parsed("k")?.unwrap_or(3))
}

fn nodes(s: &Settings) -> Result<usize> {
    Ok(s.parsed("m")?.unwrap_or(30))
}

fn startup(s: &Settings) -> Result<StartupChoice> {
    Ok(s.parsed("startup")?.unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub problem: ProblemConfig,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub startup: StartupChoice,
    pub keep_states: bool,
}

impl SolveConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        s.check_allowed("solve", &keys(&["k", "m", "n", "dt", "startup"]))?;
        let problem = ProblemConfig::from_settings(s)?;
        let n = match config::step_counts(s, problem.horizon)?.as_deref() {
            Some(&[n]) => n,
            Some(_) => return Err(CliError::field("n", "solve takes a single step count")),
            None => return Err(CliError::field("n", "required (or dt)")),
        };
        Ok(SolveConfig {
            k: order(s)?,
            m: nodes(s)?,
            n,
            startup: startup(s)?,
            keep_states: s.contains("states"),
            problem,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub trajectory: Trajectory,
    /// `φ(T)` from the closed form, when there is one.
    pub exact_final: Option<f64>,
    pub elapsed: Duration,
}

fn options(choice: StartupChoice, config: &ProblemConfig, problem: &FdeProblem) -> Result<SolveOptions> {
    Ok(SolveOptions {
        startup: choice.resolve(config, problem)?,
        ..SolveOptions::default()
    })
}

pub fn run_solve(cfg: &SolveConfig) -> Result<SolveRun> {
    let problem = cfg.problem.problem()?;
    let opts = SolveOptions {
        store_states: cfg.keep_states,
        ..options(cfg.startup, &cfg.problem, &problem)?
    };
    let start = Instant::now();
    let trajectory = solve(&problem, cfg.m, cfg.k, cfg.n, &opts)?;
    let elapsed = start.elapsed();
    let exact_final = cfg.problem.exact().map(|f| f(problem.horizon()));
    Ok(SolveRun {
        trajectory,
        exact_final,
        elapsed,
    })
}

/// What errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    ClosedForm,
    /// Same scheme on a finer step and a larger grid.
    SelfReference { n: usize, m: usize },
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceKind::ClosedForm => f.write_str("closed-form"),
            ReferenceKind::SelfReference { n, m } => write!(f, "self(n={n};m={m})"),
        }
    }
}

enum Reference {
    Exact(Box<dyn Fn(f64) -> f64 + Send + Sync>),
    Run(Trajectory),
}

impl Reference {
    /// Error of `traj` in `norm`. A reference run must sample every time of
    /// `traj`.
    fn error(&self, traj: &Trajectory, norm: Norm) -> f64 {
        let last = traj.len() - 1;
        let at = |i: usize| -> f64 {
            match self {
                Reference::Exact(f) => f(traj.times[i]),
                Reference::Run(r) => r.phi[i * (r.len() - 1) / last],
            }
        };
        match norm {
            Norm::Endpoint => (traj.phi[last] - at(last)).abs(),
            Norm::Max => (0..=last).map(|i| (traj.phi[i] - at(i)).abs()).fold(0.0, f64::max),
        }
    }
}

fn reference(
    problem_cfg: &ProblemConfig,
    problem: &FdeProblem,
    self_reference: bool,
    startup: StartupChoice,
    k: usize,
    n: usize,
    m: usize,
) -> Result<(Reference, ReferenceKind)> {
    if !self_reference {
        return match problem_cfg.exact() {
            Some(f) => Ok((Reference::Exact(Box::new(f)), ReferenceKind::ClosedForm)),
            None => Err(CliError::field(
                "self-reference",
                "this problem has no closed-form solution; pass --self-reference",
            )),
        };
    }
    let traj = solve(problem, m, k, n, &options(startup, problem_cfg, problem)?)?;
    Ok((Reference::Run(traj), ReferenceKind::SelfReference { n, m }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub problem: ProblemConfig,
    pub k: usize,
    pub m: usize,
    /// Step counts, each twice the previous.
    pub steps: Vec<usize>,
    pub startup: StartupChoice,
    pub self_reference: bool,
    pub norm: Norm,
}

impl ConvergeConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        s.check_allowed("converge", &keys(&["k", "m", "n", "dt", "startup", "self-reference", "norm"]))?;
        let problem = ProblemConfig::from_settings(s)?;
        let steps = config::step_counts(s, problem.horizon)?
            .ok_or_else(|| CliError::field("dt", "required: a list of at least three steps (or N)"))?;
        if steps.len() < 3 {
            return Err(CliError::field("dt", "needs at least three steps"));
        }
        if let Some(w) = steps.windows(2).find(|w| w[1] != 2 * w[0]) {
            return Err(CliError::field(
                "dt",
                format!("steps must halve from one row to the next (N {} then {})", w[0], w[1]),
            ));
        }
        Ok(ConvergeConfig {
            k: order(s)?,
            m: nodes(s)?,
            steps,
            startup: startup(s)?,
            self_reference: s.flag("self-reference")?,
            norm: s.parsed("norm")?.unwrap_or_default(),
            problem,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub n: usize,
    pub error: f64,
    /// `log2(e_{i-1}/e_i)`, from the second row on.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log e` against `log Δt` over the last
    /// [`FIT_ROWS`] rows.
    pub slope: f64,
    pub reference: ReferenceKind,
}

/// `log(e_prev/e)/log(dt_prev/dt)`; `log2` of the error ratio when the step
/// halves.
pub fn observed_order(prev: (f64, f64), cur: (f64, f64)) -> f64 {
    (prev.1 / cur.1).ln() / (prev.0 / cur.0).ln()
}

/// Least-squares slope through `(ln x, ln y)`.
pub fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn run_convergence(cfg: &ConvergeConfig) -> Result<ConvergenceTable> {
    let problem = cfg.problem.problem()?;
    let finest = *cfg.steps.last().expect("validated non-empty");
    let (reference, kind) = reference(
        &cfg.problem,
        &problem,
        cfg.self_reference,
        cfg.startup,
        cfg.k,
        finest * SELF_REFERENCE_REFINEMENT,
        cfg.m + SELF_REFERENCE_EXTRA_NODES,
    )?;
    let opts = options(cfg.startup, &cfg.problem, &problem)?;
    let errors = cfg
        .steps
        .par_iter()
        .map(|&n| {
            let traj = solve(&problem, cfg.m, cfg.k, n, &opts)?;
            Ok(reference.error(&traj, cfg.norm))
        })
        .collect::<Result<Vec<f64>>>()?;
    let horizon = problem.horizon();
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(errors.len());
    for (&n, &error) in cfg.steps.iter().zip(&errors) {
        let dt = horizon / n as f64;
        let observed_order = rows.last().map(|p| observed_order((p.dt, p.error), (dt, error)));
        rows.push(ConvergenceRow {
            dt,
            n,
            error,
            observed_order,
        });
    }
    let tail: Vec<(f64, f64)> = rows[rows.len().saturating_sub(FIT_ROWS)..]
        .iter()
        .map(|r| (r.dt, r.error))
        .collect();
    Ok(ConvergenceTable {
        slope: fitted_slope(&tail),
        rows,
        reference: kind,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MConvergeConfig {
    pub problem: ProblemConfig,
    pub k: usize,
    /// Increasing node bounds.
    pub m: Vec<usize>,
    pub n: usize,
    pub startup: StartupChoice,
    pub self_reference: bool,
    pub norm: Norm,
}

impl MConvergeConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        s.check_allowed("mconverge", &keys(&["k", "m", "n", "dt", "startup", "self-reference", "norm"]))?;
        let problem = ProblemConfig::from_settings(s)?;
        let m = config::counts(s, "m")?.ok_or_else(|| CliError::field("m", "required: a list of node bounds"))?;
        if m.len() < 2 {
            return Err(CliError::field("m", "needs at least two values"));
        }
        if m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::field("m", "values must increase"));
        }
        let n = match config::step_counts(s, problem.horizon)?.as_deref() {
            Some(&[n]) => n,
            Some(_) => return Err(CliError::field("n", "mconverge takes a single step count")),
            None => 10_000,
        };
        Ok(MConvergeConfig {
            k: order(s)?,
            m,
            n,
            startup: startup(s)?,
            self_reference: s.flag("self-reference")?,
            norm: s.parsed("norm")?.unwrap_or_default(),
            problem,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MConvergenceTable {
    pub rows: Vec<(usize, f64)>,
    /// `error(M_max)/error(M_min)`
    pub ratio: f64,
    pub reference: ReferenceKind,
}

pub fn run_mconvergence(cfg: &MConvergeConfig) -> Result<MConvergenceTable> {
    let problem = cfg.problem.problem()?;
    let largest = *cfg.m.last().expect("validated non-empty");
    let (reference, kind) = reference(
        &cfg.problem,
        &problem,
        cfg.self_reference,
        cfg.startup,
        cfg.k,
        cfg.n,
        largest + SELF_REFERENCE_EXTRA_NODES,
    )?;
    let opts = options(cfg.startup, &cfg.problem, &problem)?;
    let rows = cfg
        .m
        .par_iter()
        .map(|&m| {
            let traj = solve(&problem, m, cfg.k, cfg.n, &opts)?;
            Ok((m, reference.error(&traj, cfg.norm)))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = rows[rows.len() - 1].1 / rows[0].1;
    Ok(MConvergenceTable {
        rows,
        ratio,
        reference: kind,
    })
}

pub fn region_spec(s: &Settings) -> Result<RegionSpec> {
    s.check_allowed(
        "region",
        &["alpha", "k", "m", "n", "dt", "horizon", "x-min", "x-max", "y-min", "y-max", "nx", "ny", "method"],
    )?;
    let alpha = s.real("alpha")?.ok_or_else(|| CliError::field("alpha", "required"))?;
    let mut spec = RegionSpec::default_window(alpha);
    spec.k = order(s)?;
    spec.m = nodes(s)?;
    let horizon = s.real("horizon")?.unwrap_or(1.0);
    if let Some(steps) = config::step_counts(s, horizon)? {
        match steps.as_slice() {
            &[n] => spec.dt = horizon / n as f64,
            _ => return Err(CliError::field("n", "region takes a single step count")),
        }
    }
    let real = |key: &str, default: f64| -> Result<f64> { Ok(s.real(key)?.unwrap_or(default)) };
    spec.x_range = (real("x-min", spec.x_range.0)?, real("x-max", spec.x_range.1)?);
    spec.y_range = (real("y-min", spec.y_range.0)?, real("y-max", spec.y_range.1)?);
    spec.nx = s.parsed("nx")?.unwrap_or(spec.nx);
    spec.ny = s.parsed("ny")?.unwrap_or(spec.ny);
    spec.method = match s.get("method") {
        None | Some("reduced") => RadiusMethod::Reduced,
        Some("companion") => RadiusMethod::Companion,
        Some(other) => return Err(CliError::field("method", format!("`{other}`: expected reduced or companion"))),
    };
    spec.validate()?;
    Ok(spec)
}

/// Rows are scanned in parallel; the result does not depend on the thread
/// count.
pub fn run_region(spec: &RegionSpec) -> Result<RegionField> {
    spec.validate()?;
    let model = spec.model()?;
    let rows: Vec<Vec<f64>> = (0..spec.ny).into_par_iter().map(|iy| scan_row(spec, &model, iy)).collect();
    Ok(RegionField::from_values(spec.clone(), rows.concat())?)
}
