//! Problem data and the θ-direction coefficient functions.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Issue, Result};
use crate::fmath::{powf, sin, PI};

/// Time-dependent forcing `f(t)`.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// General right-hand side `F(t, φ)`.
pub type RhsFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Right-hand side of the fractional equation.
#[derive(Clone)]
pub enum RhsSpec {
    /// `F(t, φ) = -λ φ + f(t)`.
    Linear { lambda: f64, forcing: TimeFn },
    /// Arbitrary `F(t, φ)`, advanced with Picard iteration.
    Nonlinear { rhs: RhsFn },
}

impl RhsSpec {
    pub fn linear(lambda: f64, forcing: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RhsSpec::Linear {
            lambda,
            forcing: Arc::new(forcing),
        }
    }

    pub fn nonlinear(rhs: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        RhsSpec::Nonlinear { rhs: Arc::new(rhs) }
    }

    #[inline]
    pub fn eval(&self, t: f64, phi: f64) -> f64 {
        match self {
            RhsSpec::Linear { lambda, forcing } => -lambda * phi + forcing(t),
            RhsSpec::Nonlinear { rhs } => rhs(t, phi),
        }
    }

    /// The same right-hand side as an opaque `F(t, φ)`.
    pub fn as_nonlinear(&self) -> RhsSpec {
        match self {
            RhsSpec::Linear { lambda, forcing } => {
                let lambda = *lambda;
                let forcing = forcing.clone();
                RhsSpec::nonlinear(move |t, phi| -lambda * phi + forcing(t))
            }
            RhsSpec::Nonlinear { .. } => self.clone(),
        }
    }

    /// True for a linear problem with `λ < 0`, where the discrete stability
    /// estimates do not apply.
    pub fn outside_stability_theory(&self) -> bool {
        matches!(self, RhsSpec::Linear { lambda, .. } if *lambda < 0.0)
    }
}

impl fmt::Debug for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsSpec::Linear { lambda, .. } => f
                .debug_struct("Linear")
                .field("lambda", lambda)
                .finish_non_exhaustive(),
            RhsSpec::Nonlinear { .. } => f.debug_struct("Nonlinear").finish_non_exhaustive(),
        }
    }
}

/// Raw, unvalidated problem description.
#[derive(Debug, Clone, Default)]
pub struct ProblemSpec {
    pub alpha: Option<f64>,
    pub phi0: Option<f64>,
    pub horizon: Option<f64>,
    pub rhs: Option<RhsSpec>,
}

/// A validated fractional initial value problem on `[0, T]`.
#[derive(Debug, Clone)]
pub struct FdeProblem {
    alpha: f64,
    phi0: f64,
    horizon: f64,
    rhs: RhsSpec,
}

impl FdeProblem {
    pub fn new(alpha: f64, phi0: f64, horizon: f64, rhs: RhsSpec) -> Result<Self> {
        validate_problem(ProblemSpec {
            alpha: Some(alpha),
            phi0: Some(phi0),
            horizon: Some(horizon),
            rhs: Some(rhs),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rhs(&self) -> &RhsSpec {
        &self.rhs
    }

    /// Same problem on a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        FdeProblem::new(self.alpha, self.phi0, horizon, self.rhs.clone())
    }
}

/// Checks a raw description and reports every issue at once.
pub fn validate_problem(spec: ProblemSpec) -> Result<FdeProblem> {
    let mut issues = Vec::new();

    match spec.alpha {
        None => issues.push(Issue::Missing("alpha")),
        Some(a) if !a.is_finite() => issues.push(Issue::NotFinite("alpha")),
        Some(a) if !(a > 0.0 && a < 1.0) => issues.push(Issue::AlphaOutOfRange(a)),
        Some(_) => {}
    }
    match spec.phi0 {
        None => issues.push(Issue::Missing("phi0")),
        Some(p) if !p.is_finite() => issues.push(Issue::NotFinite("phi0")),
        Some(_) => {}
    }
    match spec.horizon {
        None => issues.push(Issue::Missing("horizon")),
        Some(t) if t.is_nan() || t.is_infinite() => issues.push(Issue::NotFinite("horizon")),
        Some(t) if t <= 0.0 => issues.push(Issue::HorizonNotPositive(t)),
        Some(_) => {}
    }
    if let Some(RhsSpec::Linear { lambda, .. }) = &spec.rhs {
        if !lambda.is_finite() {
            issues.push(Issue::NotFinite("lambda"));
        }
    }
    if spec.rhs.is_none() {
        issues.push(Issue::Missing("rhs"));
    }

    if !issues.is_empty() {
        return Err(Error::InvalidProblem(issues));
    }
    Ok(FdeProblem {
        alpha: spec.alpha.unwrap(),
        phi0: spec.phi0.unwrap(),
        horizon: spec.horizon.unwrap(),
        rhs: spec.rhs.unwrap(),
    })
}

/// Coefficient functions of the extended equation at one value of θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaCoeffs {
    /// `1/(1-θ)`
    pub c0: f64,
    /// `θ/(1-θ)`
    pub c1: f64,
    /// `ω_α(θ) = θ^{-α}(1-θ)^{α-1} / (Γ(1-α)Γ(α))`
    pub w_alpha: f64,
    /// `(1-θ) ω_α(θ)`
    pub w_alpha0: f64,
    /// `θ ω_α(θ)`
    pub w_alpha1: f64,
}

/// `1 / (Γ(1-α)Γ(α)) = sin(πα)/π`.
#[inline]
pub fn inv_gamma_product(alpha: f64) -> f64 {
    sin(PI * alpha) / PI
}

pub fn theta_coefficients(theta: f64, alpha: f64) -> Result<ThetaCoeffs> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain {
            param: "theta",
            value: theta,
            expected: "(0, 1)",
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain {
            param: "alpha",
            value: alpha,
            expected: "(0, 1)",
        });
    }
    let one_minus = 1.0 - theta;
    let c0 = 1.0 / one_minus;
    let c1 = theta * c0;
    let w_alpha = powf(theta, -alpha) * powf(one_minus, alpha - 1.0) * inv_gamma_product(alpha);
    Ok(ThetaCoeffs {
        c0,
        c1,
        w_alpha,
        w_alpha0: one_minus * w_alpha,
        w_alpha1: theta * w_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_theta_values() {
        let c = theta_coefficients(0.5, 0.3).unwrap();
        assert_eq!(c.c0, 2.0);
        assert_eq!(c.c1, 1.0);

        let c = theta_coefficients(0.5, 0.5).unwrap();
        let two_over_pi = 0.636_619_772_367_581_3;
        assert!((c.w_alpha - two_over_pi).abs() < 1e-15);
        assert!((c.w_alpha0 - 1.0 / core::f64::consts::PI).abs() < 1e-15);
        assert!((c.w_alpha1 - 1.0 / core::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn gamma_product_matches_two_gamma_calls() {
        for &a in &[0.1, 0.25, 0.5, 0.8, 0.95] {
            let direct = libm::tgamma(a) * libm::tgamma(1.0 - a);
            assert!((inv_gamma_product(a) * direct - 1.0).abs() < 1e-14, "alpha {a}");
        }
    }

    #[test]
    fn rejects_endpoints() {
        assert!(theta_coefficients(0.0, 0.5).is_err());
        assert!(theta_coefficients(1.0, 0.5).is_err());
        assert!(theta_coefficients(0.5, 1.0).is_err());
        assert!(theta_coefficients(0.5, 0.0).is_err());
    }

    #[test]
    fn validates_case_two() {
        let p = FdeProblem::new(0.5, 1.0, 1.0, RhsSpec::linear(1.0, |_| 0.0)).unwrap();
        assert_eq!(p.alpha(), 0.5);
        assert!(!p.rhs().outside_stability_theory());
    }

    #[test]
    fn rejects_alpha_at_endpoint() {
        let err = FdeProblem::new(1.0, 1.0, 1.0, RhsSpec::linear(1.0, |_| 0.0)).unwrap_err();
        assert_eq!(err, Error::InvalidProblem(alloc::vec![Issue::AlphaOutOfRange(1.0)]));
    }

    #[test]
    fn rejects_negative_horizon() {
        let err = FdeProblem::new(0.3, 1.0, -1.0, RhsSpec::linear(1.0, |_| 0.0)).unwrap_err();
        assert_eq!(err, Error::InvalidProblem(alloc::vec![Issue::HorizonNotPositive(-1.0)]));
    }

    #[test]
    fn itemizes_every_issue() {
        let err = validate_problem(ProblemSpec {
            alpha: Some(1.5),
            phi0: None,
            horizon: Some(0.0),
            rhs: None,
        })
        .unwrap_err();
        let Error::InvalidProblem(issues) = err else {
            panic!("expected validation report")
        };
        let fields: Vec<_> = issues.iter().map(Issue::field).collect();
        assert_eq!(fields, ["alpha", "phi0", "horizon", "rhs"]);
    }

    #[test]
    fn negative_lambda_is_flagged() {
        assert!(RhsSpec::linear(-2.0, |_| 0.0).outside_stability_theory());
    }

    proptest! {
        #[test]
        fn weight_split_and_c0(theta in 1e-6f64..0.999_999, alpha in 0.01f64..0.99) {
            let c = theta_coefficients(theta, alpha).unwrap();
            prop_assert!(c.w_alpha > 0.0);
            prop_assert!(((c.w_alpha0 + c.w_alpha1) - c.w_alpha).abs() <= 1e-14 * c.w_alpha);
            prop_assert!(((1.0 - theta) * c.c0 - 1.0).abs() <= 1e-14);
            prop_assert_eq!(c.c1, theta * c.c0);
        }
    }
}
