//! Built-in test problems and their exact θ-states.
//!
//! | case | right-hand side                              | φ₀ | solution        |
//! |------|----------------------------------------------|----|-----------------|
//! | I    | `Γ(1+α)`                                     | 0  | `t^α`           |
//! | II   | `-λφ`                                        | 1  | `E_α(-λt^α)`    |
//! | III  | `-λφ + sin t`                                | 1  | none            |
//! | IV   | `-λφ³ + Γ(3+α)t²/2 + λt^{6+3α}`              | 0  | `t^{2+α}`       |
//! | V    | `-λφ³`                                       | 1  | none            |
//!
//! `λ = 1` unless overridden.

use core::cell::Cell;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::fmath::{expm1, powf, sin, tgamma};
use crate::integrate::relaxation_integral;
use crate::mittag_leffler::ml;
use crate::problem::{FdeProblem, RhsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    I,
    II,
    III,
    IV,
    V,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [CaseId::I, CaseId::II, CaseId::III, CaseId::IV, CaseId::V];

    pub fn default_lambda(self) -> f64 {
        match self {
            CaseId::I => 0.0,
            _ => 1.0,
        }
    }

    pub fn phi0(self) -> f64 {
        match self {
            CaseId::I | CaseId::IV => 0.0,
            CaseId::II | CaseId::III | CaseId::V => 1.0,
        }
    }

    pub fn is_nonlinear(self) -> bool {
        matches!(self, CaseId::IV | CaseId::V)
    }

    pub fn has_closed_form(self) -> bool {
        matches!(self, CaseId::I | CaseId::II | CaseId::IV)
    }

    /// The case as a problem on `[0, horizon]`. `lambda` overrides the
    /// default coefficient (Case I ignores it).
    pub fn problem(self, alpha: f64, lambda: Option<f64>, horizon: f64) -> Result<FdeProblem> {
        let lambda = lambda.unwrap_or(self.default_lambda());
        let rhs = match self {
            CaseId::I => {
                let g = tgamma(1.0 + alpha);
                RhsSpec::linear(0.0, move |_| g)
            }
            CaseId::II => RhsSpec::linear(lambda, |_| 0.0),
            CaseId::III => RhsSpec::linear(lambda, sin),
            CaseId::IV => {
                let g = tgamma(3.0 + alpha) / 2.0;
                let p = 6.0 + 3.0 * alpha;
                RhsSpec::nonlinear(move |t, phi| -lambda * phi * phi * phi + g * t * t + lambda * powf(t, p))
            }
            CaseId::V => RhsSpec::nonlinear(move |_, phi| -lambda * phi * phi * phi),
        };
        FdeProblem::new(alpha, self.phi0(), horizon, rhs)
    }

    /// Exact θ-state `φ(t, θ)` of the lifted problem, for cases with a closed
    /// form.
    pub fn exact_state(self, alpha: f64, lambda: Option<f64>, t: f64, theta: f64) -> Result<f64> {
        let lambda = lambda.unwrap_or(self.default_lambda());
        let phi0 = self.phi0();
        match self {
            CaseId::I => {
                let c = theta / (1.0 - theta);
                Ok(phi0 + tgamma(1.0 + alpha) * -expm1(-c * t) / theta)
            }
            CaseId::II => {
                let failure = Cell::new(None);
                let v = state_from_rhs(phi0, t, theta, |tau| {
                    match ml(alpha, -lambda * powf(tau, alpha)) {
                        Ok(e) => -lambda * e,
                        Err(err) => {
                            failure.set(Some(err));
                            0.0
                        }
                    }
                });
                match failure.into_inner() {
                    Some(err) => Err(err),
                    None => Ok(v),
                }
            }
            CaseId::IV => {
                let g = tgamma(3.0 + alpha) / 2.0;
                Ok(state_from_rhs(phi0, t, theta, |tau| g * tau * tau))
            }
            CaseId::III | CaseId::V => Err(Error::NoClosedForm(self)),
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::III => "III",
            CaseId::IV => "IV",
            CaseId::V => "V",
        })
    }
}

/// Unknown case name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCase;

impl fmt::Display for UnknownCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown case (expected I, II, III, IV or V)")
    }
}

impl FromStr for CaseId {
    type Err = UnknownCase;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(CaseId::I),
            "II" | "2" => Ok(CaseId::II),
            "III" | "3" => Ok(CaseId::III),
            "IV" | "4" => Ok(CaseId::IV),
            "V" | "5" => Ok(CaseId::V),
            _ => Err(UnknownCase),
        }
    }
}

/// `φ₀ + c₀ ∫₀^t e^{-c₁(t-τ)} F(τ) dτ` for a right-hand side known along the
/// solution.
pub fn state_from_rhs<F: FnMut(f64) -> f64>(phi0: f64, t: f64, theta: f64, rhs: F) -> f64 {
    let c0 = 1.0 / (1.0 - theta);
    phi0 + c0 * relaxation_integral(theta * c0, t, rhs)
}
