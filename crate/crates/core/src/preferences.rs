//! Utility specifications and risk-aversion representations.
//!
//! Utilities are written as functions of the log-return `v = ln F`. The
//! classical utility of wealth is `U(F) = u(ln F)`, so that
//! `U'(F) = u'(v) / F` and `U''(F) = (u''(v) - u'(v)) / F^2`. Relative risk
//! aversion then reads `R = (u' - u'') / u'`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

/// Real-valued function shared across threads. User-supplied callables must
/// be pure.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A utility given through its marginal `u'(v)` in the log-return `v`.
#[derive(Clone)]
pub struct CustomUtility {
    marginal: RealFn,
    second: Option<RealFn>,
    utility: Option<RealFn>,
}

impl CustomUtility {
    pub fn new(marginal: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            marginal: Arc::new(marginal),
            second: None,
            utility: None,
        }
    }

    /// Supplies an analytic `u''`; otherwise a central difference is used.
    pub fn with_second(mut self, second: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.second = Some(Arc::new(second));
        self
    }

    /// Supplies `u` itself, used by the brute-force oracle.
    pub fn with_utility(mut self, utility: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.utility = Some(Arc::new(utility));
        self
    }

    pub fn has_utility(&self) -> bool {
        self.utility.is_some()
    }
}

impl fmt::Debug for CustomUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomUtility")
            .field("analytic_second", &self.second.is_some())
            .field("utility", &self.utility.is_some())
            .finish()
    }
}

/// State-independent utility of the log-return.
#[derive(Debug, Clone)]
pub enum UtilitySpec {
    /// Growth-optimizing investor, `u(v) = v`.
    Log,
    /// Constant relative risk aversion `R`.
    ConstantRelative {
        r: f64,
    },
    /// Absolute risk aversion `A = a / f` relative to the growth-optimal
    /// payoff; produces the affine family `F = (f - 1) / a + 1`.
    ConstantAbsoluteOverF {
        a: f64,
    },
    Custom(CustomUtility),
}

/// Serializable name of a utility family as used in product files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilityFamily {
    Log,
    ConstantRelative {
        #[serde(rename = "R")]
        r: f64,
    },
    ConstantAbsoluteOverF {
        a: f64,
    },
}

impl From<UtilityFamily> for UtilitySpec {
    fn from(family: UtilityFamily) -> Self {
        match family {
            UtilityFamily::Log => UtilitySpec::Log,
            UtilityFamily::ConstantRelative { r } => UtilitySpec::ConstantRelative { r },
            UtilityFamily::ConstantAbsoluteOverF { a } => UtilitySpec::ConstantAbsoluteOverF { a },
        }
    }
}

fn fd_step(v: f64) -> f64 {
    1e-5 * v.abs().max(1.0)
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::ConstantRelative { r } if !(r.is_finite() && r > 0.0) => {
                Err(ForgeError::InvalidParameter {
                    name: "R",
                    value: r,
                    reason: "must be positive and finite",
                })
            }
            UtilitySpec::ConstantAbsoluteOverF { a } if !(a.is_finite() && a > 0.0) => {
                Err(ForgeError::InvalidParameter {
                    name: "a",
                    value: a,
                    reason: "must be positive and finite",
                })
            }
            _ => Ok(()),
        }
    }

    /// Open interval of log-returns on which `u' > 0` is guaranteed by
    /// construction.
    pub fn log_return_domain(&self) -> (f64, f64) {
        match *self {
            UtilitySpec::ConstantAbsoluteOverF { a } if a > 1.0 => {
                ((1.0 - 1.0 / a).ln(), f64::INFINITY)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Marginal utility `u'(v)`; rejects non-positive values.
    pub fn marginal(&self, v: f64) -> Result<f64> {
        let value = match self {
            UtilitySpec::Log => 1.0,
            UtilitySpec::ConstantRelative { r } => ((1.0 - r) * v).exp(),
            UtilitySpec::ConstantAbsoluteOverF { a } => {
                let e = v.exp();
                e / (a * e - a + 1.0)
            }
            UtilitySpec::Custom(c) => (c.marginal)(v),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(ForgeError::Monotonicity { at: v, value });
        }
        Ok(value)
    }

    /// Second derivative `u''(v)`.
    pub fn second(&self, v: f64) -> Result<f64> {
        match self {
            UtilitySpec::Log => Ok(0.0),
            UtilitySpec::ConstantRelative { r } => Ok((1.0 - r) * ((1.0 - r) * v).exp()),
            UtilitySpec::ConstantAbsoluteOverF { a } => {
                let e = v.exp();
                let d = a * e - a + 1.0;
                Ok(self.marginal(v)? * (1.0 - a) / d)
            }
            UtilitySpec::Custom(c) => match &c.second {
                Some(second) => Ok(second(v)),
                None => {
                    let h = fd_step(v);
                    let up = self.marginal(v + h)?;
                    let down = self.marginal(v - h)?;
                    Ok((up - down) / (2.0 * h))
                }
            },
        }
    }

    /// Utility `u(v)` when available in closed form.
    pub fn utility(&self, v: f64) -> Option<f64> {
        match self {
            UtilitySpec::Log => Some(v),
            UtilitySpec::ConstantRelative { r } => {
                if *r == 1.0 {
                    Some(v)
                } else {
                    Some(((1.0 - r) * v).exp() / (1.0 - r))
                }
            }
            UtilitySpec::ConstantAbsoluteOverF { a } => {
                let arg = a * v.exp() - a + 1.0;
                (arg > 0.0).then(|| arg.ln() / a)
            }
            UtilitySpec::Custom(c) => c.utility.as_ref().map(|u| u(v)),
        }
    }

    /// Relative risk aversion as a function of the log-return.
    pub fn risk_aversion_at(&self, v: f64) -> Result<f64> {
        match *self {
            UtilitySpec::Log => Ok(1.0),
            UtilitySpec::ConstantRelative { r } => Ok(r),
            UtilitySpec::ConstantAbsoluteOverF { a } => {
                let e = v.exp();
                let d = a * e - a + 1.0;
                if !(d > 0.0) {
                    return Err(ForgeError::Monotonicity { at: v, value: d });
                }
                Ok(a * e / d)
            }
            UtilitySpec::Custom(_) => Ok(log_return_conversion(self, v.exp())?.1),
        }
    }

    /// Antiderivative of the risk aversion in the log-return,
    /// `G(v) = v - ln u'(v)`, so that `G' = R`.
    pub(crate) fn potential(&self, v: f64) -> Result<f64> {
        match *self {
            UtilitySpec::Log => Ok(v),
            UtilitySpec::ConstantRelative { r } => Ok(r * v),
            UtilitySpec::ConstantAbsoluteOverF { a } => {
                let arg = a * v.exp() - a + 1.0;
                if !(arg > 0.0) {
                    return Err(ForgeError::Monotonicity { at: v, value: arg });
                }
                Ok(arg.ln())
            }
            UtilitySpec::Custom(_) => Ok(v - self.marginal(v)?.ln()),
        }
    }
}

/// Arrow-Pratt relative risk aversion `R(F) = -F U''(F) / U'(F)`.
pub fn relative_risk_aversion(spec: &UtilitySpec, payoff: f64) -> Result<f64> {
    check_payoff(payoff)?;
    spec.validate()?;
    match spec {
        UtilitySpec::Custom(_) => {
            let v = payoff.ln();
            let up = spec.marginal(v)?;
            let upp = spec.second(v)?;
            let u_prime = up / payoff;
            let u_second = (upp - up) / (payoff * payoff);
            Ok(-payoff * u_second / u_prime)
        }
        _ => spec.risk_aversion_at(payoff.ln()),
    }
}

/// Absolute risk aversion from relative: `A = R / F`.
pub fn absolute_from_relative(r: f64, payoff: f64) -> f64 {
    r / payoff
}

/// Marginal utility and relative risk aversion read in log-return form:
/// `(u'(ln F), (u' - u'') / u')`.
pub fn log_return_conversion(spec: &UtilitySpec, payoff: f64) -> Result<(f64, f64)> {
    check_payoff(payoff)?;
    let v = payoff.ln();
    let up = spec.marginal(v)?;
    let upp = spec.second(v)?;
    Ok((up, (up - upp) / up))
}

fn check_payoff(payoff: f64) -> Result<()> {
    if !(payoff.is_finite() && payoff > 0.0) {
        return Err(ForgeError::InvalidParameter {
            name: "F",
            value: payoff,
            reason: "payoff must be positive",
        });
    }
    Ok(())
}

/// Risk aversion expressed as a function of the payoff level.
#[derive(Clone)]
pub struct FunctionProfile {
    r: RealFn,
    potential: Option<RealFn>,
    lower: f64,
    upper: f64,
    label: String,
}

impl FunctionProfile {
    /// `r` must be positive on the open payoff interval `(lower, upper)`.
    pub fn new(
        label: impl Into<String>,
        lower: f64,
        upper: f64,
        r: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            r: Arc::new(r),
            potential: None,
            lower,
            upper,
            label: label.into(),
        }
    }

    /// Supplies an antiderivative `G(v)` of `R(e^v)` in the log-payoff `v`,
    /// used instead of quadrature.
    pub fn with_potential(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Arc::new(g));
        self
    }

    pub(crate) fn potential(&self) -> Option<&RealFn> {
        self.potential.as_ref()
    }

    pub fn eval(&self, payoff: f64) -> f64 {
        (self.r)(payoff)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for FunctionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionProfile")
            .field("label", &self.label)
            .field("domain", &(self.lower, self.upper))
            .finish()
    }
}

/// Risk-aversion input to the forward solvers.
#[derive(Debug, Clone)]
pub enum RiskAversionProfile {
    /// One value per interior mesh edge (between buckets `j` and `j+1`);
    /// `+inf` freezes the payoff across that edge.
    ProfileOfX(Vec<f64>),
    FunctionOfF(FunctionProfile),
}

impl RiskAversionProfile {
    pub fn flat(value: f64, buckets: usize) -> Self {
        RiskAversionProfile::ProfileOfX(vec![value; buckets.saturating_sub(1)])
    }
}

/// Profile reproducing the affine family `F = (f - 1) / a + 1` when solved
/// against the growth-optimal `f`.
///
/// With `A = a / f` and `f = a (F - 1) + 1` on the solution, the relative
/// risk aversion depends on the payoff only: `R(F) = a F / (a F - a + 1)`.
pub fn one_param_profile(a: f64) -> Result<RiskAversionProfile> {
    if !(a.is_finite() && a > 0.0) {
        return Err(ForgeError::InvalidParameter {
            name: "a",
            value: a,
            reason: "must be positive and finite",
        });
    }
    let lower = (1.0 - 1.0 / a).max(0.0);
    Ok(RiskAversionProfile::FunctionOfF(
        FunctionProfile::new(
            format!("one_param(a={a})"),
            lower,
            f64::INFINITY,
            move |payoff| a * payoff / (a * payoff - a + 1.0),
        )
        .with_potential(move |v| (a * v.exp() - a + 1.0).ln()),
    ))
}

/// Lifts every value of a profile to at least `floor`. `+inf` stays.
pub fn clamp_profile_min(profile: &RiskAversionProfile, floor: f64) -> RiskAversionProfile {
    match profile {
        RiskAversionProfile::ProfileOfX(values) => {
            RiskAversionProfile::ProfileOfX(values.iter().map(|r| r.max(floor)).collect())
        }
        RiskAversionProfile::FunctionOfF(p) => {
            let inner = p.r.clone();
            RiskAversionProfile::FunctionOfF(FunctionProfile::new(
                format!("max({}, {floor})", p.label),
                p.lower,
                p.upper,
                move |payoff| inner(payoff).max(floor),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_family_is_unit_risk_aversion() {
        for payoff in [0.1, 1.0, 7.0] {
            assert_eq!(
                relative_risk_aversion(&UtilitySpec::Log, payoff).unwrap(),
                1.0
            );
        }
        let (up, r) = log_return_conversion(&UtilitySpec::Log, 3.0).unwrap();
        assert_eq!((up, r), (1.0, 1.0));
    }

    #[test]
    fn constant_relative_is_constant() {
        let spec = UtilitySpec::ConstantRelative { r: 2.5 };
        assert_eq!(relative_risk_aversion(&spec, 7.0).unwrap(), 2.5);
    }

    #[test]
    fn power_utility_from_wealth_form() {
        // U(F) = F^(1-g)/(1-g) has U' = F^-g, U'' = -g F^(-g-1), so -F U''/U' = g.
        let gamma = 3.0;
        let oracle = |payoff: f64| {
            let u1 = payoff.powf(-gamma);
            let u2 = -gamma * payoff.powf(-gamma - 1.0);
            -payoff * u2 / u1
        };
        // u'(v) = F U'(F) = e^{(1-g) v}
        let spec = UtilitySpec::Custom(CustomUtility::new(move |v| ((1.0 - gamma) * v).exp()));
        for payoff in [0.5, 1.0, 2.0, 4.0] {
            let r = relative_risk_aversion(&spec, payoff).unwrap();
            assert!((r - oracle(payoff)).abs() < 1e-8, "{r}");
            assert!((oracle(payoff) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_exponential_log_utility_is_r_two() {
        // u(v) = -e^{-v}: u' = e^{-v}, u'' = -e^{-v}; U(F) = -1/F has R = 2.
        let spec =
            UtilitySpec::Custom(CustomUtility::new(|v| (-v).exp()).with_second(|v| -(-v).exp()));
        for payoff in [0.3, 1.0, 5.0] {
            let (up, r) = log_return_conversion(&spec, payoff).unwrap();
            assert!((up - 1.0 / payoff).abs() < 1e-15);
            assert!((r - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn risk_neutral_boundary() {
        let spec = UtilitySpec::Custom(CustomUtility::new(|v| v.exp()).with_second(|v| v.exp()));
        let (_, r) = log_return_conversion(&spec, 2.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn absolute_from_relative_cases() {
        assert_eq!(absolute_from_relative(1.0, 2.0), 0.5);
        assert_eq!(absolute_from_relative(f64::INFINITY, 5.0), f64::INFINITY);
        assert_eq!(absolute_from_relative(0.0, 3.0), 0.0);
    }

    #[test]
    fn non_positive_marginal_is_rejected() {
        let spec = UtilitySpec::Custom(CustomUtility::new(|v| -v.exp()));
        assert!(matches!(
            relative_risk_aversion(&spec, 1.0),
            Err(ForgeError::Monotonicity { .. })
        ));
        assert!(matches!(
            log_return_conversion(&spec, 1.0),
            Err(ForgeError::Monotonicity { .. })
        ));
    }

    #[test]
    fn one_param_profile_matches_family() {
        let a = 2.0;
        let RiskAversionProfile::FunctionOfF(p) = one_param_profile(a).unwrap() else {
            panic!("expected function profile");
        };
        assert_eq!(p.domain().0, 0.5);
        let spec = UtilitySpec::ConstantAbsoluteOverF { a };
        for payoff in [0.6, 1.0, 1.25, 3.0] {
            let from_family = relative_risk_aversion(&spec, payoff).unwrap();
            assert!((p.eval(payoff) - from_family).abs() < 1e-14);
            // R = F * A with A = a / f and f = a (F - 1) + 1
            let f = a * (payoff - 1.0) + 1.0;
            assert!((p.eval(payoff) - payoff * a / f).abs() < 1e-14);
        }
        assert!(one_param_profile(0.0).is_err());
    }

    #[test]
    fn clamp_lifts_values() {
        let p = RiskAversionProfile::ProfileOfX(vec![0.5, 2.0, f64::INFINITY]);
        let RiskAversionProfile::ProfileOfX(v) = clamp_profile_min(&p, 1.0) else {
            unreachable!()
        };
        assert_eq!(v, vec![1.0, 2.0, f64::INFINITY]);
    }

    #[test]
    fn family_serde_shape() {
        let fam: UtilityFamily =
            serde_json::from_str(r#"{"family":"constant_relative","R":2.0}"#).unwrap();
        assert_eq!(fam, UtilityFamily::ConstantRelative { r: 2.0 });
        let fam: UtilityFamily = serde_json::from_str(r#"{"family":"log"}"#).unwrap();
        assert_eq!(fam, UtilityFamily::Log);
    }
}
