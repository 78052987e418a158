//! Flat `key = value` configuration.
//!
//! A config file holds one setting per line; `#` starts a comment. Command
//! line flags are merged on top of the file, so a flag always wins. Keys are
//! case-insensitive apart from the single-letter aliases `M`, `N` and `T`,
//! and `_` is accepted for `-`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use epde_core::problem::{validate_problem, ProblemSpec};
use epde_core::stepper::ExactStateFn;
use epde_core::{exact_solution, CaseId, FdeProblem, RhsSpec, StartupMode};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Keys left out of the config digest; they name where output goes.
const UNHASHED: [&str; 2] = ["output", "states"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub fn normalize_key(key: &str) -> String {
    match key.trim() {
        "M" => "m".into(),
        "N" => "n".into(),
        "T" | "t" => "horizon".into(),
        other => other.to_ascii_lowercase().replace('_', "-"),
    }
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Settings::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected `key = value`, found `{}`",
                    lineno + 1,
                    raw.trim()
                )));
            };
            settings.set(key, value.trim());
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    /// Entries of `other` replace those already present.
    pub fn merge(&mut self, other: Settings) {
        self.values.extend(other.values);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Rejects keys that `command` does not read.
    pub fn check_allowed(&self, command: &str, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k) && !UNHASHED.contains(k)) {
            Some(key) => Err(CliError::field(key, format!("not a setting of `{command}`"))),
            None => Ok(()),
        }
    }

    /// Sorted `key=value` lines, without output locations.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.values.iter().filter(|(k, _)| !UNHASHED.contains(&k.as_str())) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Hex SHA-256 of [`Settings::canonical`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::field(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| parse_real(v).map_err(|m| CliError::field(key, m))).transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(CliError::field(key, format!("`{v}` is not a boolean"))),
        }
    }

    pub fn list<T>(&self, key: &str, mut item: impl FnMut(&str) -> std::result::Result<T, String>) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|part| item(part.trim()).map_err(|m| CliError::field(key, m)))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

/// A decimal number or a ratio `p/q`.
pub fn parse_real(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
            p / q
        }
        None => text.parse().map_err(|_| format!("`{text}` is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

fn parse_count(text: &str) -> std::result::Result<usize, String> {
    text.parse().map_err(|_| format!("`{text}` is not a non-negative integer"))
}

/// Forcing `f(t)` of an inline linear problem `-λφ + f(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Zero,
    Sin,
    Cos,
    Const(f64),
    /// `t^p`
    Power(f64),
}

impl FromStr for Forcing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "zero" | "0" => return Ok(Forcing::Zero),
            "sin" => return Ok(Forcing::Sin),
            "cos" => return Ok(Forcing::Cos),
            _ => {}
        }
        match s.split_once(':') {
            Some(("const", v)) => parse_real(v).map(Forcing::Const),
            Some(("power", v)) => parse_real(v).map(Forcing::Power),
            _ => Err("expected zero, sin, cos, const:<c> or power:<p>".into()),
        }
    }
}

impl Forcing {
    fn rhs(self, lambda: f64) -> RhsSpec {
        match self {
            Forcing::Zero => RhsSpec::linear(lambda, |_| 0.0),
            Forcing::Sin => RhsSpec::linear(lambda, f64::sin),
            Forcing::Cos => RhsSpec::linear(lambda, f64::cos),
            Forcing::Const(c) => RhsSpec::linear(lambda, move |_| c),
            Forcing::Power(p) => RhsSpec::linear(lambda, move |t| t.powf(p)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSource {
    Case(CaseId),
    Inline(Option<Forcing>),
}

/// Either a built-in case or an inline linear problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub source: ProblemSource,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub phi0: Option<f64>,
    pub horizon: f64,
}

pub const PROBLEM_KEYS: [&str; 6] = ["case", "alpha", "lambda", "phi0", "horizon", "forcing"];

impl ProblemConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let case = s
            .get("case")
            .map(|v| v.parse::<CaseId>().map_err(|e| CliError::field("case", format!("`{v}`: {e}"))))
            .transpose()?;
        let source = match case {
            Some(case) => {
                for key in ["forcing", "phi0"] {
                    if s.contains(key) {
                        return Err(CliError::field(key, "only applies to inline problems (drop --case)"));
                    }
                }
                ProblemSource::Case(case)
            }
            None => ProblemSource::Inline(
                s.get("forcing")
                    .map(|v| v.parse::<Forcing>().map_err(|e| CliError::field("forcing", format!("`{v}`: {e}"))))
                    .transpose()?,
            ),
        };
        Ok(ProblemConfig {
            source,
            alpha: s.real("alpha")?,
            lambda: s.real("lambda")?,
            phi0: s.real("phi0")?,
            horizon: s.real("horizon")?.unwrap_or(1.0),
        })
    }

    pub fn case(&self) -> Option<CaseId> {
        match self.source {
            ProblemSource::Case(c) => Some(c),
            ProblemSource::Inline(_) => None,
        }
    }

    /// Validated problem. Inline problems report every missing field.
    pub fn problem(&self) -> Result<FdeProblem> {
        match self.source {
            ProblemSource::Case(case) => {
                let alpha = self.alpha.ok_or_else(|| CliError::field("alpha", "required"))?;
                Ok(case.problem(alpha, self.lambda, self.horizon)?)
            }
            ProblemSource::Inline(forcing) => {
                let rhs = match (forcing, self.lambda) {
                    (Some(f), Some(l)) => Some(f.rhs(l)),
                    (None, _) => return Err(CliError::field("forcing", "required without --case")),
                    (_, None) => return Err(CliError::field("lambda", "required without --case")),
                };
                Ok(validate_problem(ProblemSpec {
                    alpha: self.alpha,
                    phi0: self.phi0,
                    horizon: Some(self.horizon),
                    rhs,
                })?)
            }
        }
    }

    /// Closed-form `φ(t)`, when the case has one.
    pub fn exact(&self) -> Option<impl Fn(f64) -> f64 + Send + Sync + 'static> {
        let case = self.case().filter(|c| c.has_closed_form())?;
        let alpha = self.alpha?;
        let lambda = self.lambda.unwrap_or(case.default_lambda());
        exact_solution(case, alpha, lambda, self.horizon).ok()?;
        Some(move |t| exact_solution(case, alpha, lambda, t).unwrap_or(f64::NAN))
    }

    fn exact_state(&self) -> Option<ExactStateFn> {
        let case = self.case().filter(|c| c.has_closed_form())?;
        let (alpha, lambda) = (self.alpha?, self.lambda);
        Some(Arc::new(move |t, theta| case.exact_state(alpha, lambda, t, theta)))
    }
}

/// Startup as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartupChoice {
    /// Collocated for linear problems, exact for nonlinear cases with a
    /// closed form, cascade otherwise.
    #[default]
    Auto,
    Cascade,
    Refined(usize),
    Exact,
    Collocated,
}

impl FromStr for StartupChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "auto" => Ok(StartupChoice::Auto),
            "cascade" => Ok(StartupChoice::Cascade),
            "exact" => Ok(StartupChoice::Exact),
            "collocated" => Ok(StartupChoice::Collocated),
            other => match other.split_once(':') {
                Some(("refined", r)) => match r.parse::<usize>() {
                    Ok(r) if r >= 1 => Ok(StartupChoice::Refined(r)),
                    _ => Err(format!("substep count `{r}` must be a positive integer")),
                },
                _ => Err("expected auto, cascade, refined:<R>, exact or collocated".into()),
            },
        }
    }
}

impl StartupChoice {
    pub fn resolve(self, config: &ProblemConfig, problem: &FdeProblem) -> Result<StartupMode> {
        let linear = matches!(problem.rhs(), RhsSpec::Linear { .. });
        Ok(match self {
            StartupChoice::Auto if linear => StartupMode::Collocated,
            StartupChoice::Auto => match config.exact_state() {
                Some(f) => StartupMode::Exact(Some(f)),
                None => StartupMode::Cascade,
            },
            StartupChoice::Cascade => StartupMode::Cascade,
            StartupChoice::Refined(r) => StartupMode::Refined(r),
            StartupChoice::Collocated if linear => StartupMode::Collocated,
            StartupChoice::Collocated => {
                return Err(CliError::field("startup", "collocated startup needs a linear right-hand side"))
            }
            StartupChoice::Exact => match config.exact_state() {
                Some(f) => StartupMode::Exact(Some(f)),
                None => return Err(CliError::field("startup", "exact startup needs a case with a closed form")),
            },
        })
    }
}

/// How a run is compared with its reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    /// `|φ_N - φ(T)|`
    #[default]
    Endpoint,
    /// Largest error over the run's time grid.
    Max,
}

impl FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "endpoint" => Ok(Norm::Endpoint),
            "max" => Ok(Norm::Max),
            _ => Err("expected endpoint or max".into()),
        }
    }
}

/// Step counts from either `n` or `dt` (never both).
pub fn step_counts(s: &Settings, horizon: f64) -> Result<Option<Vec<usize>>> {
    let counts = s.list("n", parse_count)?;
    let steps = s.list("dt", parse_real)?;
    match (counts, steps) {
        (Some(_), Some(_)) => Err(CliError::field("dt", "give either N or dt, not both")),
        (Some(n), None) => {
            if let Some(&bad) = n.iter().find(|&&n| n == 0) {
                return Err(CliError::field("n", format!("step count {bad} must be positive")));
            }
            Ok(Some(n))
        }
        (None, Some(dts)) => dts
            .into_iter()
            .map(|dt| {
                if dt <= 0.0 {
                    return Err(CliError::field("dt", format!("{dt} is not positive")));
                }
                let n = (horizon / dt).round();
                if n < 1.0 || ((horizon / dt) - n).abs() > 1e-9 * n {
                    return Err(CliError::field("dt", format!("{dt} does not divide the horizon {horizon}")));
                }
                Ok(n as usize)
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        (None, None) => Ok(None),
    }
}

pub fn counts(s: &Settings, key: &str) -> Result<Option<Vec<usize>>> {
    s.list(key, parse_count)
}
