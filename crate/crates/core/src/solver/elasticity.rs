use crate::error::{ForgeError, Result};
use crate::growth::{normalize_budget, PayoffCurve};
use crate::market::{same_len, Distribution};
use crate::numeric::{self, adaptive_simpson};
use crate::preferences::{FunctionProfile, UtilitySpec};

use super::{ImpliedRiskAversion, ImpliedValue, SolveSettings};

/// Largest log-payoff magnitude a path may reach before it is treated as
/// leaving the representable range.
const LOG_PAYOFF_LIMIT: f64 = 700.0;
const MAX_BISECTIONS: usize = 200;
const MAX_STEP_ITERATIONS: usize = 200;

fn log_ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

/// Payoff for a risk-aversion profile given per mesh edge.
///
/// Each edge obeys `ln(F_{k+1}/F_k) = ln(f_{k+1}/f_k) / R_k`; the result is
/// rescaled to unit cost against `m`.
pub fn solve_elasticity_profile(
    f: &PayoffCurve,
    profile: &[f64],
    m: &Distribution,
    allow_gambling: bool,
) -> Result<PayoffCurve> {
    same_len(m.len(), f.len())?;
    if profile.len() + 1 != f.len() {
        return Err(ForgeError::LengthMismatch {
            what: "risk profile edges",
            expected: f.len() - 1,
            found: profile.len(),
        });
    }
    for (edge, &r) in profile.iter().enumerate() {
        if r.is_nan() {
            return Err(ForgeError::InvalidValue {
                what: "risk aversion",
                index: edge,
                value: r,
            });
        }
        if r == 0.0 {
            return Err(ForgeError::ZeroRiskAversion { edge });
        }
        if r < 0.0 && !allow_gambling {
            return Err(ForgeError::RiskLovingInput { edge, value: r });
        }
    }

    let mut log_payoff = Vec::with_capacity(f.len());
    let mut acc = 0.0f64;
    log_payoff.push(acc);
    for (k, (lf, r)) in log_ratios(f.values()).into_iter().zip(profile).enumerate() {
        acc += lf / r;
        if !acc.is_finite() {
            return Err(ForgeError::Overflow { index: k + 1 });
        }
        log_payoff.push(acc);
    }
    let top = log_payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = log_payoff.iter().map(|l| (l - top).exp()).collect();
    if let Some(index) = values.iter().position(|v| !(*v > 0.0)) {
        return Err(ForgeError::Overflow { index });
    }
    normalize_budget(&mut values, m);
    if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(ForgeError::Overflow { index });
    }
    PayoffCurve::new(values)
}

/// Risk aversion that depends on the state only through the payoff level.
#[derive(Debug, Clone, Copy)]
pub enum StateAgnosticRisk<'a> {
    Utility(&'a UtilitySpec),
    Profile(&'a FunctionProfile),
}

impl<'a> From<&'a UtilitySpec> for StateAgnosticRisk<'a> {
    fn from(spec: &'a UtilitySpec) -> Self {
        StateAgnosticRisk::Utility(spec)
    }
}

impl<'a> From<&'a FunctionProfile> for StateAgnosticRisk<'a> {
    fn from(profile: &'a FunctionProfile) -> Self {
        StateAgnosticRisk::Profile(profile)
    }
}

impl StateAgnosticRisk<'_> {
    /// Open interval of admissible log-payoffs.
    fn log_domain(&self) -> (f64, f64) {
        let (lo, hi) = match self {
            StateAgnosticRisk::Utility(spec) => spec.log_return_domain(),
            StateAgnosticRisk::Profile(p) => {
                let (lo, hi) = p.domain();
                (
                    if lo > 0.0 { lo.ln() } else { f64::NEG_INFINITY },
                    if hi.is_finite() {
                        hi.ln()
                    } else {
                        f64::INFINITY
                    },
                )
            }
        };
        let shrink = |x: f64| 1e-12 * x.abs().max(1.0);
        (
            (lo + shrink(lo)).max(-LOG_PAYOFF_LIMIT),
            (hi - shrink(hi)).min(LOG_PAYOFF_LIMIT),
        )
    }

    fn risk_aversion(&self, v: f64, edge: usize) -> Result<f64> {
        let r = match self {
            StateAgnosticRisk::Utility(spec) => spec.risk_aversion_at(v)?,
            StateAgnosticRisk::Profile(p) => p.eval(v.exp()),
        };
        if r.is_nan() {
            return Err(ForgeError::StepDivergence { edge });
        }
        if r <= 0.0 {
            return Err(ForgeError::RiskLovingInput { edge, value: r });
        }
        Ok(r)
    }

    /// `integral_{from}^{to} R(e^s) ds`.
    fn increment(&self, from: f64, to: f64, edge: usize) -> Result<f64> {
        match self {
            StateAgnosticRisk::Utility(spec) => Ok(spec.potential(to)? - spec.potential(from)?),
            StateAgnosticRisk::Profile(p) => {
                if let Some(g) = p.potential() {
                    let delta = g(to) - g(from);
                    return if delta.is_nan() {
                        Err(ForgeError::StepDivergence { edge })
                    } else {
                        Ok(delta)
                    };
                }
                let integrand = |s: f64| p.eval(s.exp());
                let tol = 1e-14 * (to - from).abs().max(1e-3);
                adaptive_simpson(&integrand, from, to, tol)
                    .ok_or(ForgeError::StepDivergence { edge })
            }
        }
    }
}

enum Step {
    To(f64),
    /// The path would leave the domain from below.
    Below,
    Above,
}

/// Advances the log-payoff across one edge so that the accumulated risk
/// aversion matches the growth-optimal log-ratio:
/// `integral_{v}^{v'} R(e^s) ds = ln(f_{k+1}/f_k)`.
///
/// The midpoint-refined recurrence gives the starting point; a safeguarded
/// Newton iteration then solves the relation to round-off.
fn advance(
    risk: &StateAgnosticRisk<'_>,
    from: f64,
    target: f64,
    domain: (f64, f64),
    edge: usize,
) -> Result<Step> {
    if target == 0.0 {
        return Ok(Step::To(from));
    }
    let clamp = |v: f64| v.clamp(domain.0, domain.1);
    let r0 = risk.risk_aversion(from, edge)?;
    let euler = clamp(from + target / r0);
    let r_mid = risk.risk_aversion(0.5 * (from + euler), edge)?;
    let predicted = clamp(from + target / r_mid);

    let residual = |v: f64| -> Result<f64> { Ok(risk.increment(from, v, edge)? - target) };

    // Bracket the root; the residual is increasing in v.
    let up = target > 0.0;
    let (mut lo, mut hi);
    let mut far = predicted;
    if (far - from).abs() == 0.0 {
        far = clamp(if up { from + 1e-12 } else { from - 1e-12 });
    }
    loop {
        let r = residual(far)?;
        if (up && r >= 0.0) || (!up && r <= 0.0) {
            break;
        }
        let wall = if up { domain.1 } else { domain.0 };
        if far == wall {
            return Ok(if up { Step::Above } else { Step::Below });
        }
        far = clamp(from + 2.0 * (far - from));
    }
    if up {
        lo = from;
        hi = far;
    } else {
        lo = far;
        hi = from;
    }

    let tol = 1e-15 * target.abs().max(1.0);
    let mut v = predicted.clamp(lo, hi);
    for _ in 0..MAX_STEP_ITERATIONS {
        let h = residual(v)?;
        if h.abs() <= tol {
            return Ok(Step::To(v));
        }
        if h > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        if hi - lo <= 4.0 * f64::EPSILON * v.abs().max(1.0) {
            return Ok(Step::To(v));
        }
        let slope = risk.risk_aversion(v, edge)?;
        let newton = v - h / slope;
        v = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(ForgeError::StepDivergence { edge })
}

enum Path {
    Cost(f64, Vec<f64>),
    Below,
    Above,
}

fn integrate_path(
    risk: &StateAgnosticRisk<'_>,
    start: f64,
    log_ratios: &[f64],
    m: &Distribution,
    domain: (f64, f64),
) -> Result<Path> {
    let mut path = Vec::with_capacity(log_ratios.len() + 1);
    path.push(start);
    let mut v = start;
    for (edge, &target) in log_ratios.iter().enumerate() {
        match advance(risk, v, target, domain, edge)? {
            Step::To(next) => v = next,
            Step::Below => return Ok(Path::Below),
            Step::Above => return Ok(Path::Above),
        }
        path.push(v);
    }
    let cost = numeric::sum(path.iter().zip(m.weights()).map(|(v, w)| v.exp() * w));
    Ok(Path::Cost(cost, path))
}

/// Result of [`shoot_state_agnostic`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOutcome {
    pub payoff: PayoffCurve,
    pub bisections: usize,
    /// `sum F m - 1`.
    pub cost_residual: f64,
}

/// Payoff of a state-agnostic investor, together with shooting diagnostics.
///
/// The first bucket's payoff is found by bisection on the budget; the rest
/// of the curve follows edge by edge from the elasticity relation. Paths are
/// increasing in the starting payoff, so the budget is monotone in it.
pub fn shoot_state_agnostic(
    f: &PayoffCurve,
    risk: StateAgnosticRisk<'_>,
    m: &Distribution,
    settings: &SolveSettings,
) -> Result<ShootingOutcome> {
    same_len(m.len(), f.len())?;
    settings.validate()?;
    if let StateAgnosticRisk::Utility(spec) = risk {
        spec.validate()?;
    }
    let domain = risk.log_domain();
    let ratios = log_ratios(f.values());

    let mut lo = settings.shooting_bracket[0].ln().max(domain.0);
    let mut hi = settings.shooting_bracket[1].ln().min(domain.1);
    if lo >= hi {
        return Err(ForgeError::InvalidParameter {
            name: "shooting_bracket",
            value: settings.shooting_bracket[0],
            reason: "bracket lies outside the risk profile's domain",
        });
    }

    // Positive means the start is too high.
    let side = |path: &Path| match path {
        Path::Below => -1.0,
        Path::Above => 1.0,
        Path::Cost(c, _) => c - 1.0,
    };
    let cost_of = |path: &Path| match path {
        Path::Below => 0.0,
        Path::Above => f64::INFINITY,
        Path::Cost(c, _) => *c,
    };
    let finish = |path: Path, bisections: usize| -> Result<ShootingOutcome> {
        let Path::Cost(cost, logs) = path else {
            unreachable!("only priced paths finish")
        };
        let payoff = PayoffCurve::new(logs.into_iter().map(f64::exp).collect())?;
        Ok(ShootingOutcome {
            payoff,
            bisections,
            cost_residual: cost - 1.0,
        })
    };

    let low_path = integrate_path(&risk, lo, &ratios, m, domain)?;
    let high_path = integrate_path(&risk, hi, &ratios, m, domain)?;
    let (s_lo, s_hi) = (side(&low_path), side(&high_path));
    if s_lo > 0.0 || s_hi < 0.0 {
        return Err(ForgeError::BracketNotStraddling {
            low_cost: cost_of(&low_path),
            high_cost: cost_of(&high_path),
        });
    }
    if s_lo.abs() <= settings.shooting_tol {
        return finish(low_path, 0);
    }
    if s_hi.abs() <= settings.shooting_tol {
        return finish(high_path, 0);
    }

    let mut last_residual = f64::NAN;
    for iteration in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let path = integrate_path(&risk, mid, &ratios, m, domain)?;
        let s = side(&path);
        if let Path::Cost(..) = path {
            last_residual = s;
            if s.abs() <= settings.shooting_tol {
                return finish(path, iteration);
            }
        }
        if s > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    Err(ForgeError::NonConvergence {
        iterations: MAX_BISECTIONS,
        residual: last_residual,
    })
}

/// Budget-normalized payoff of a state-agnostic investor.
pub fn solve_elasticity_state_agnostic(
    f: &PayoffCurve,
    risk: StateAgnosticRisk<'_>,
    m: &Distribution,
    settings: &SolveSettings,
) -> Result<PayoffCurve> {
    shoot_state_agnostic(f, risk, m, settings).map(|o| o.payoff)
}

fn edge_quotient(numerator: f64, denominator: f64) -> ImpliedValue {
    match (numerator == 0.0, denominator == 0.0) {
        (true, true) => ImpliedValue::Indeterminate,
        (false, true) => ImpliedValue::Value(f64::INFINITY),
        _ => ImpliedValue::Value(numerator / denominator),
    }
}

/// Implied edgewise risk aversion
/// `R_{k,k+1} = ln(f_{k+1}/f_k) / ln(F_{k+1}/F_k)`.
///
/// Frozen payoff edges give `+inf`; edges where neither curve moves are
/// indeterminate and never interpolated.
pub fn implied_risk_aversion(
    payoff: &PayoffCurve,
    growth_optimal: &PayoffCurve,
) -> Result<ImpliedRiskAversion> {
    same_len(growth_optimal.len(), payoff.len())?;
    let lf = log_ratios(growth_optimal.values());
    let lp = log_ratios(payoff.values());
    Ok(ImpliedRiskAversion {
        values: lf
            .into_iter()
            .zip(lp)
            .map(|(n, d)| edge_quotient(n, d))
            .collect(),
    })
}

/// Risk aversion of one payoff relative to another of known risk aversion:
/// `R1 = R2 * ln(F2_{j+1}/F2_j) / ln(F1_{j+1}/F1_j)`.
pub fn relative_elasticity(
    first: &PayoffCurve,
    second: &PayoffCurve,
    second_profile: &[f64],
) -> Result<ImpliedRiskAversion> {
    same_len(second.len(), first.len())?;
    if second_profile.len() + 1 != first.len() {
        return Err(ForgeError::LengthMismatch {
            what: "risk profile edges",
            expected: first.len() - 1,
            found: second_profile.len(),
        });
    }
    for (edge, &r) in second_profile.iter().enumerate() {
        if !(r > 0.0) {
            return Err(ForgeError::RiskLovingInput { edge, value: r });
        }
    }
    let l2 = log_ratios(second.values());
    let l1 = log_ratios(first.values());
    Ok(ImpliedRiskAversion {
        values: l2
            .into_iter()
            .zip(l1)
            .zip(second_profile)
            .map(|((n, d), r2)| match edge_quotient(n, d) {
                ImpliedValue::Value(q) => {
                    let r1 = r2 * q;
                    if r1.is_nan() {
                        ImpliedValue::Indeterminate
                    } else {
                        ImpliedValue::Value(r1)
                    }
                }
                ImpliedValue::Indeterminate => ImpliedValue::Indeterminate,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{growth_optimal_payoff, payoff_cost};
    use crate::market::Role;
    use crate::preferences::{one_param_profile, CustomUtility, RiskAversionProfile};

    fn dist(w: &[f64], role: Role) -> Distribution {
        Distribution::new(w.to_vec(), role).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn unit_profile_returns_growth_optimal() {
        let m = dist(&[0.2, 0.5, 0.3], Role::Market);
        let b = dist(&[0.3, 0.5, 0.2], Role::Belief);
        let f = growth_optimal_payoff(&b, &m).unwrap();
        let out = solve_elasticity_profile(&f, &[1.0, 1.0], &m, false).unwrap();
        close(out.values(), f.values(), 1e-12);
    }

    #[test]
    fn infinite_profile_returns_bond() {
        let m = dist(&[0.2, 0.5, 0.3], Role::Market);
        let f = PayoffCurve::new(vec![1.5, 1.0, 2.0 / 3.0]).unwrap();
        let out = solve_elasticity_profile(&f, &[f64::INFINITY; 2], &m, false).unwrap();
        close(out.values(), &[1.0, 1.0, 1.0], 1e-15);
    }

    #[test]
    fn square_root_profile_two_buckets() {
        // F = sqrt(f) / Z with Z = 0.5 sqrt(1.6) + 0.5 sqrt(0.4)
        let m = dist(&[0.5, 0.5], Role::Market);
        let f = PayoffCurve::new(vec![1.6, 0.4]).unwrap();
        let out = solve_elasticity_profile(&f, &[2.0], &m, false).unwrap();
        let z = 0.5 * 1.6f64.sqrt() + 0.5 * 0.4f64.sqrt();
        close(out.values(), &[1.6f64.sqrt() / z, 0.4f64.sqrt() / z], 1e-14);
        assert!((out.values()[0] - 1.3333333333).abs() < 1e-4);
        assert!((out.values()[1] - 0.6666666667).abs() < 1e-4);
    }

    #[test]
    fn profile_errors() {
        let m = dist(&[0.5, 0.5], Role::Market);
        let f = PayoffCurve::new(vec![1.6, 0.4]).unwrap();
        assert_eq!(
            solve_elasticity_profile(&f, &[-1.0], &m, false).unwrap_err(),
            ForgeError::RiskLovingInput {
                edge: 0,
                value: -1.0
            }
        );
        assert!(solve_elasticity_profile(&f, &[-1.0], &m, true).is_ok());
        assert_eq!(
            solve_elasticity_profile(&f, &[0.0], &m, true).unwrap_err(),
            ForgeError::ZeroRiskAversion { edge: 0 }
        );
        let extreme = PayoffCurve::new(vec![1e300, 1e-300]).unwrap();
        assert!(matches!(
            solve_elasticity_profile(&extreme, &[1e-3], &m, false),
            Err(ForgeError::Overflow { .. })
        ));
    }

    #[test]
    fn state_agnostic_log_and_crra() {
        let m = dist(&[0.2, 0.5, 0.3], Role::Market);
        let b = dist(&[0.3, 0.5, 0.2], Role::Belief);
        let f = growth_optimal_payoff(&b, &m).unwrap();
        let settings = SolveSettings::default();

        let log =
            solve_elasticity_state_agnostic(&f, (&UtilitySpec::Log).into(), &m, &settings).unwrap();
        close(log.values(), f.values(), 1e-11);

        // U(F) = -1/F: F = sqrt(b/m) / Z
        let spec = UtilitySpec::ConstantRelative { r: 2.0 };
        let out = solve_elasticity_state_agnostic(&f, (&spec).into(), &m, &settings).unwrap();
        let z = 0.2 * 1.5f64.sqrt() + 0.5 + 0.3 * (2.0f64 / 3.0).sqrt();
        let expected = [1.5f64.sqrt() / z, 1.0 / z, (2.0f64 / 3.0).sqrt() / z];
        close(out.values(), &expected, 1e-10);
        assert!((payoff_cost(&out, &m) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn state_agnostic_custom_utility() {
        let m = dist(&[0.2, 0.5, 0.3], Role::Market);
        let f = PayoffCurve::new(vec![1.5, 1.0, 2.0 / 3.0]).unwrap();
        let spec = UtilitySpec::Custom(CustomUtility::new(|v| (-v).exp()));
        let out =
            solve_elasticity_state_agnostic(&f, (&spec).into(), &m, &SolveSettings::default())
                .unwrap();
        let z = 0.2 * 1.5f64.sqrt() + 0.5 + 0.3 * (2.0f64 / 3.0).sqrt();
        close(
            out.values(),
            &[1.5f64.sqrt() / z, 1.0 / z, (2.0f64 / 3.0).sqrt() / z],
            1e-10,
        );
    }

    #[test]
    fn one_param_profile_reproduces_affine_family() {
        let m = dist(&[0.25, 0.75], Role::Market);
        let f = PayoffCurve::new(vec![2.0, 2.0 / 3.0]).unwrap();
        let RiskAversionProfile::FunctionOfF(p) = one_param_profile(2.0).unwrap() else {
            unreachable!()
        };
        let out = solve_elasticity_state_agnostic(&f, (&p).into(), &m, &SolveSettings::default())
            .unwrap();
        close(out.values(), &[1.5, 5.0 / 6.0], 1e-10);
    }

    #[test]
    fn narrow_bracket_is_reported() {
        let m = dist(&[0.5, 0.5], Role::Market);
        let f = PayoffCurve::new(vec![1.6, 0.4]).unwrap();
        let settings = SolveSettings {
            shooting_bracket: [2.0, 3.0],
            ..SolveSettings::default()
        };
        let err = solve_elasticity_state_agnostic(&f, (&UtilitySpec::Log).into(), &m, &settings)
            .unwrap_err();
        assert!(matches!(err, ForgeError::BracketNotStraddling { low_cost, .. } if low_cost > 1.0));
    }

    #[test]
    fn negative_function_profile_rejected() {
        let m = dist(&[0.5, 0.5], Role::Market);
        let f = PayoffCurve::new(vec![1.6, 0.4]).unwrap();
        let p = FunctionProfile::new("neg", 0.0, f64::INFINITY, |_| -1.0);
        assert!(matches!(
            solve_elasticity_state_agnostic(&f, (&p).into(), &m, &SolveSettings::default()),
            Err(ForgeError::RiskLovingInput { .. })
        ));
    }

    #[test]
    fn implied_cases() {
        let f = PayoffCurve::new(vec![1.5, 1.0, 2.0 / 3.0]).unwrap();
        let r = implied_risk_aversion(&f, &f).unwrap();
        assert!(r.values.iter().all(|v| *v == ImpliedValue::Value(1.0)));

        let r = implied_risk_aversion(&PayoffCurve::bond(3), &f).unwrap();
        assert!(r
            .values
            .iter()
            .all(|v| *v == ImpliedValue::Value(f64::INFINITY)));

        let flat = PayoffCurve::new(vec![1.0, 1.0, 2.0]).unwrap();
        let r = implied_risk_aversion(&flat, &flat).unwrap();
        assert_eq!(r.values[0], ImpliedValue::Indeterminate);
    }

    #[test]
    fn implied_round_trip_of_profile() {
        let m = dist(&[0.1, 0.2, 0.3, 0.4], Role::Market);
        let f = PayoffCurve::new(vec![2.0, 1.5, 0.5, 1.0]).unwrap();
        let profile = [0.7, 3.0, f64::INFINITY];
        let out = solve_elasticity_profile(&f, &profile, &m, false).unwrap();
        let r = implied_risk_aversion(&out, &f).unwrap();
        for (got, want) in r.values.iter().zip(profile) {
            let got = got.value().unwrap();
            if want.is_infinite() {
                assert_eq!(got, f64::INFINITY);
            } else {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relative_elasticity_cases() {
        let f = PayoffCurve::new(vec![2.0, 1.5, 0.5, 1.0]).unwrap();
        let other = PayoffCurve::new(vec![1.2, 1.1, 0.8, 1.0]).unwrap();
        let r2 = [0.5, 2.0, 4.0];
        let same = relative_elasticity(&other, &other, &r2).unwrap();
        for (a, b) in same.values.iter().zip(r2) {
            assert!((a.value().unwrap() - b).abs() < 1e-14);
        }
        let via_growth = relative_elasticity(&other, &f, &[1.0; 3]).unwrap();
        assert_eq!(via_growth, implied_risk_aversion(&other, &f).unwrap());
        let bond = relative_elasticity(&PayoffCurve::bond(4), &f, &r2).unwrap();
        assert!(bond
            .values
            .iter()
            .all(|v| *v == ImpliedValue::Value(f64::INFINITY)));
    }
}
