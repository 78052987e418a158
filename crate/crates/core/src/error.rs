use alloc::vec::Vec;
use core::fmt;

use crate::cases::CaseId;

pub type Result<T> = core::result::Result<T, Error>;

/// One problem found while validating a raw problem description.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    Missing(&'static str),
    NotFinite(&'static str),
    AlphaOutOfRange(f64),
    HorizonNotPositive(f64),
}

impl Issue {
    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match self {
            Issue::Missing(f) | Issue::NotFinite(f) => f,
            Issue::AlphaOutOfRange(_) => "alpha",
            Issue::HorizonNotPositive(_) => "horizon",
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Missing(name) => write!(f, "{name}: missing"),
            Issue::NotFinite(name) => write!(f, "{name}: not a finite number"),
            Issue::AlphaOutOfRange(a) => write!(f, "alpha: {a} is not in the open interval (0, 1)"),
            Issue::HorizonNotPositive(t) => write!(f, "horizon: {t} is not positive"),
        }
    }
}

/// Errors from the solver core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument lies outside its admissible range.
    Domain {
        param: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// Problem validation failed; every issue found is listed.
    InvalidProblem(Vec<Issue>),
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    UnsupportedOrder(usize),
    /// An iterative eigen-solve did not converge.
    NoConvergence {
        what: &'static str,
        index: usize,
        iterations: usize,
    },
    /// A matrix factorization hit a zero (or non-finite) pivot.
    Singular {
        index: usize,
        pivot: f64,
    },
    /// Picard iteration for a nonlinear right-hand side did not reach tolerance.
    PicardDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    /// Exact startup was requested without a state evaluator.
    MissingExactState,
    /// The case has no closed-form solution.
    NoClosedForm(CaseId),
    /// Fewer steps than the scheme order.
    TooFewSteps {
        steps: usize,
        order: usize,
    },
    /// A result exceeds the range of `f64`.
    Overflow(&'static str),
    /// The requested combination of options is not available.
    Unsupported(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain {
                param,
                value,
                expected,
            } => write!(f, "{param} = {value} is outside {expected}"),
            Error::InvalidProblem(issues) => {
                write!(f, "invalid problem:")?;
                for issue in issues {
                    write!(f, " [{issue}]")?;
                }
                Ok(())
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::UnsupportedOrder(k) => write!(f, "BDF order {k} is not supported (1..=5)"),
            Error::NoConvergence {
                what,
                index,
                iterations,
            } => write!(
                f,
                "{what}: no convergence for index {index} after {iterations} iterations"
            ),
            Error::Singular { index, pivot } => {
                write!(f, "singular step matrix: pivot {index} = {pivot:e}")
            }
            Error::PicardDiverged {
                step,
                iterations,
                residual,
            } => write!(
                f,
                "Picard iteration at step {step} stopped after {iterations} iterations with residual {residual:e}; reduce the time step"
            ),
            Error::MissingExactState => {
                write!(f, "exact startup requires an exact state evaluator")
            }
            Error::NoClosedForm(case) => write!(
                f,
                "case {case} has no closed-form solution; use a fine-step reference trajectory"
            ),
            Error::TooFewSteps { steps, order } => {
                write!(f, "{steps} steps is fewer than the BDF order {order}")
            }
            Error::Overflow(what) => write!(f, "{what} overflows f64"),
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
        }
    }
}

impl core::error::Error for Error {}
