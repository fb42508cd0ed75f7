//! Product audit: checks an arbitrary payoff for rationality against the
//! growth-optimal payoff of the same belief and market.
//!
//! Three rules of thumb hold for every investor with positive risk
//! aversion, whatever its exact profile:
//!
//! * co-monotonicity: `F` and `f` rise and fall together;
//! * state-agnostic investors hold payoffs that are functions of `f`;
//! * such payoffs meet `f` only at a single level (the "bond line").

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::growth::{growth_optimal_payoff, payoff_cost, PayoffCurve, SignedCurve};
use crate::market::{same_len, Distribution};
use crate::numeric;
use crate::solver::{implied_risk_aversion, ImpliedRiskAversion, ImpliedValue};

/// Default relative tolerance of the fuzzy checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_FLAT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_BUDGET_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Offending bucket or edge indices.
    pub indices: Vec<usize>,
    /// Quantitative witnesses (levels, costs, payoff values).
    pub witness: Vec<f64>,
    pub message: String,
}

impl CheckResult {
    fn new(name: &str, status: CheckStatus, message: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status,
            indices: Vec::new(),
            witness: Vec::new(),
            message: message.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ConsistentRiskAverse,
    RiskLovingSegments,
    StateDependent,
    IrrationalOscillation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputForm {
    Funded,
    Overlay,
}

/// Summary of the implied risk-aversion profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedSummary {
    pub min: Option<f64>,
    /// Largest finite value.
    pub max_finite: Option<f64>,
    pub infinite_edges: usize,
    pub indeterminate_edges: usize,
    pub negative_edges: Vec<usize>,
    pub crossings_of_one: usize,
}

impl ImpliedSummary {
    fn from_implied(implied: &ImpliedRiskAversion) -> Self {
        let finite: Vec<f64> = implied
            .values
            .iter()
            .filter_map(|v| v.value())
            .filter(|v| v.is_finite())
            .collect();
        Self {
            min: implied
                .values
                .iter()
                .filter_map(|v| v.value())
                .reduce(f64::min),
            max_finite: finite.iter().copied().reduce(f64::max),
            infinite_edges: implied
                .values
                .iter()
                .filter(|v| matches!(v, ImpliedValue::Value(r) if r.is_infinite()))
                .count(),
            indeterminate_edges: implied
                .values
                .iter()
                .filter(|v| **v == ImpliedValue::Indeterminate)
                .count(),
            negative_edges: implied
                .values
                .iter()
                .enumerate()
                .filter(|(_, v)| matches!(v, ImpliedValue::Value(r) if *r < 0.0))
                .map(|(i, _)| i)
                .collect(),
            crossings_of_one: implied.crossings(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub input_form: InputForm,
    pub checks: Vec<CheckResult>,
    pub classification: Classification,
    pub implied: ImpliedSummary,
    /// Mean-variance risk aversion `R_a` when `F - 1` is proportional to
    /// `f - 1`.
    pub recovered_risk_aversion: Option<f64>,
    pub bond_level: Option<f64>,
    pub notes: Vec<String>,
    pub acceptable: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Human-readable rendering for terminals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let verdict = if self.acceptable {
            "ACCEPTABLE"
        } else {
            "REJECTED"
        };
        let class = serde_json::to_value(self.classification)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        out.push_str(&format!("verdict: {verdict}\nclassification: {class}\n"));
        for check in &self.checks {
            let status = match check.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Inconclusive => "inconclusive",
            };
            out.push_str(&format!("  [{status}] {}: {}", check.name, check.message));
            if !check.indices.is_empty() {
                out.push_str(&format!(" (indices {:?})", check.indices));
            }
            out.push('\n');
        }
        if let Some(min) = self.implied.min {
            out.push_str(&format!(
                "implied R: min {min}, crosses R=1 {} times, {} negative edges\n",
                self.implied.crossings_of_one,
                self.implied.negative_edges.len()
            ));
        }
        if let Some(ra) = self.recovered_risk_aversion {
            out.push_str(&format!("recovered R_a: {ra}\n"));
        }
        if let Some(c) = self.bond_level {
            out.push_str(&format!("bond line level: {c}\n"));
        }
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

fn log_ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

fn flat_sign(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

/// `F` and `f` must move in the same direction across every edge. Log-moves
/// no larger than `flat_tol` count as flat.
pub fn check_comonotonicity(
    payoff: &PayoffCurve,
    growth_optimal: &PayoffCurve,
    flat_tol: f64,
) -> Result<CheckResult> {
    same_len(growth_optimal.len(), payoff.len())?;
    let lp = log_ratios(payoff.values());
    let lf = log_ratios(growth_optimal.values());
    let offending: Vec<usize> = lp
        .iter()
        .zip(&lf)
        .enumerate()
        .filter(|(_, (p, f))| flat_sign(**p, flat_tol) * flat_sign(**f, flat_tol) < 0)
        .map(|(i, _)| i)
        .collect();
    let mut result = if offending.is_empty() {
        CheckResult::new(
            "comonotonicity",
            CheckStatus::Pass,
            "payoff moves with the growth-optimal payoff on every edge",
        )
    } else {
        CheckResult::new(
            "comonotonicity",
            CheckStatus::Fail,
            format!(
                "payoff moves against the growth-optimal payoff on {} edges (negative implied risk aversion)",
                offending.len()
            ),
        )
    };
    result.indices = offending;
    Ok(result)
}

/// A state-agnostic payoff is a function of `f`: buckets with equal `f`
/// (within `tol * max f`) must carry equal `F` (within `tol * max F`).
pub fn check_state_agnostic(
    payoff: &PayoffCurve,
    growth_optimal: &PayoffCurve,
    tol: f64,
) -> Result<CheckResult> {
    same_len(growth_optimal.len(), payoff.len())?;
    let f = growth_optimal.values();
    let big_f = payoff.values();
    let f_scale = tol * growth_optimal.max();
    let p_scale = tol * payoff.max();

    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|a, b| f[*a].total_cmp(&f[*b]));

    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if f[j] - f[i] > f_scale {
                break;
            }
            if (big_f[i] - big_f[j]).abs() > p_scale {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    if pairs.is_empty() {
        return Ok(CheckResult::new(
            "state_agnostic",
            CheckStatus::Pass,
            "payoff is a single-valued function of the growth-optimal payoff",
        ));
    }
    pairs.sort_unstable();
    let (i, j) = pairs[0];
    let mut result = CheckResult::new(
        "state_agnostic",
        CheckStatus::Fail,
        format!(
            "buckets {i} and {j} share f = {} but pay {} and {}: signature of a state-dependent investment",
            f[i], big_f[i], big_f[j]
        ),
    );
    result.indices = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    result.witness = vec![f[i], big_f[i], big_f[j]];
    Ok(result)
}

struct Crossing {
    index: usize,
    low: f64,
    high: f64,
    estimate: f64,
}

/// Intersections of a state-agnostic payoff with `f` all occur at one
/// common level `c`. Reports that level.
///
/// Crossings are buckets where the curves agree within `tol` and edges
/// where `ln F - ln f` changes sign; the level at a sign change is
/// estimated by linear interpolation in log space and bracketed by the
/// ranges of both curves across the edge. The check fails only when the
/// brackets of two crossings are disjoint. Identical curves, tangencies and
/// overlapping stretches are inconclusive.
pub fn check_bond_line(
    payoff: &PayoffCurve,
    growth_optimal: &PayoffCurve,
    tol: f64,
) -> Result<(CheckResult, Option<f64>)> {
    same_len(growth_optimal.len(), payoff.len())?;
    let f = growth_optimal.values();
    let big_f = payoff.values();
    let n = f.len();
    let touches: Vec<bool> = (0..n)
        .map(|k| (big_f[k] - f[k]).abs() <= tol * big_f[k].max(f[k]))
        .collect();
    let gap: Vec<f64> = (0..n).map(|k| (big_f[k] / f[k]).ln()).collect();

    if touches.iter().all(|t| *t) {
        return Ok((
            CheckResult::new(
                "bond_line",
                CheckStatus::Inconclusive,
                "payoff coincides with the growth-optimal payoff",
            ),
            None,
        ));
    }

    let mut crossings = Vec::new();
    let mut degenerate = 0usize;
    let mut k = 0;
    while k < n {
        if touches[k] {
            let start = k;
            while k + 1 < n && touches[k + 1] {
                k += 1;
            }
            let end = k;
            let run = start..=end;
            let low = run
                .clone()
                .map(|i| big_f[i].min(f[i]))
                .fold(f64::INFINITY, f64::min);
            let high = run.clone().map(|i| big_f[i].max(f[i])).fold(0.0, f64::max);
            let left = start.checked_sub(1).map(|i| gap[i].signum());
            let right = (end + 1 < n).then(|| gap[end + 1].signum());
            let tangent = matches!((left, right), (Some(a), Some(b)) if a == b);
            let spread = run.clone().map(|i| f[i]).fold(0.0, f64::max)
                - run.clone().map(|i| f[i]).fold(f64::INFINITY, f64::min);
            let overlap = spread > tol * growth_optimal.max();
            if tangent || overlap {
                degenerate += 1;
            } else {
                let estimate = numeric::sum(run.clone().map(|i| big_f[i])) / run.count() as f64;
                crossings.push(Crossing {
                    index: start,
                    low,
                    high,
                    estimate,
                });
            }
        } else if k + 1 < n && !touches[k + 1] && gap[k] * gap[k + 1] < 0.0 {
            let t = gap[k] / (gap[k] - gap[k + 1]);
            let estimate = (f[k].ln() + t * (f[k + 1] / f[k]).ln()).exp();
            let low = f[k].min(f[k + 1]).max(big_f[k].min(big_f[k + 1]));
            let high = f[k].max(f[k + 1]).min(big_f[k].max(big_f[k + 1]));
            crossings.push(Crossing {
                index: k,
                low: low.min(high),
                high: high.max(low),
                estimate,
            });
        }
        k += 1;
    }

    if crossings.len() <= 1 && degenerate > 0 {
        return Ok((
            CheckResult::new(
                "bond_line",
                CheckStatus::Inconclusive,
                "only tangential or overlapping contact with the growth-optimal payoff",
            ),
            crossings.first().map(|c| c.estimate),
        ));
    }
    match crossings.len() {
        0 => {
            return Ok((
                CheckResult::new(
                    "bond_line",
                    CheckStatus::Pass,
                    "payoff never meets the growth-optimal payoff",
                ),
                None,
            ))
        }
        1 => {
            let c = crossings[0].estimate;
            return Ok((
                CheckResult::new(
                    "bond_line",
                    CheckStatus::Pass,
                    format!("single intersection at level {c}"),
                ),
                Some(c),
            ));
        }
        _ => {}
    }

    let floor = crossings
        .iter()
        .map(|c| c.low)
        .fold(f64::NEG_INFINITY, f64::max);
    let ceiling = crossings
        .iter()
        .map(|c| c.high)
        .fold(f64::INFINITY, f64::min);
    if floor <= ceiling * (1.0 + tol) {
        let mean = numeric::sum(crossings.iter().map(|c| c.estimate)) / crossings.len() as f64;
        let level = mean.clamp(floor.min(ceiling), ceiling.max(floor));
        Ok((
            CheckResult::new(
                "bond_line",
                CheckStatus::Pass,
                format!("{} intersections share level {level}", crossings.len()),
            ),
            Some(level),
        ))
    } else {
        let mut result = CheckResult::new(
            "bond_line",
            CheckStatus::Fail,
            format!(
                "intersections at distinct levels (between {ceiling} and {floor}): signature of a state-dependent investment"
            ),
        );
        result.indices = crossings.iter().map(|c| c.index).collect();
        result.witness = crossings.iter().map(|c| c.estimate).collect();
        Ok((result, None))
    }
}

/// Payoff submitted for audit.
#[derive(Debug, Clone)]
pub enum ProductInput {
    Funded(PayoffCurve),
    /// Zero-cost overlay `h`, audited in funded form `h + 1`.
    Overlay(SignedCurve),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub tol: f64,
    pub flat_tol: f64,
    pub budget_tol: f64,
    /// Treat state dependence as a failure.
    pub require_state_agnostic: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            flat_tol: DEFAULT_FLAT_TOLERANCE,
            budget_tol: DEFAULT_BUDGET_TOLERANCE,
            require_state_agnostic: false,
        }
    }
}

/// Least-squares `R_a` with `f - 1 = R_a (F - 1)`, accepted only if the fit is
/// exact within `tol`.
fn recover_mean_variance(payoff: &[f64], f: &[f64], m: &[f64], tol: f64) -> Option<f64> {
    let excess_f: Vec<f64> = f.iter().map(|v| v - 1.0).collect();
    let excess_p: Vec<f64> = payoff.iter().map(|v| v - 1.0).collect();
    let scale = excess_f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let num = numeric::sum(
        excess_f
            .iter()
            .zip(&excess_p)
            .zip(m)
            .map(|((a, b), w)| a * b * w),
    );
    let den = numeric::sum(excess_p.iter().zip(m).map(|(b, w)| b * b * w));
    if den == 0.0 {
        return None;
    }
    let ra = num / den;
    let worst = excess_f
        .iter()
        .zip(&excess_p)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - ra * b).abs()));
    (ra > 0.0 && ra.is_finite() && worst <= tol * scale).then_some(ra)
}

/// Runs the budget check, the three rules of thumb and the implied
/// risk-aversion diagnostics, and classifies the product.
pub fn audit_product(
    input: &ProductInput,
    m: &Distribution,
    b: &Distribution,
    options: &AuditOptions,
) -> Result<(ValidationReport, ImpliedRiskAversion)> {
    let (payoff, form) = match input {
        ProductInput::Funded(p) => (p.clone(), InputForm::Funded),
        ProductInput::Overlay(h) => (h.funded()?, InputForm::Overlay),
    };
    same_len(m.len(), payoff.len())?;
    let f = growth_optimal_payoff(b, m)?;
    let implied = implied_risk_aversion(&payoff, &f)?;

    let mut checks = Vec::new();
    let cost = payoff_cost(&payoff, m);
    let budget = if (cost - 1.0).abs() <= options.budget_tol {
        let msg = match form {
            InputForm::Funded => format!("cost sum F m = {cost}"),
            InputForm::Overlay => format!("zero cost: sum h m = {}", cost - 1.0),
        };
        CheckResult::new("budget", CheckStatus::Pass, msg)
    } else {
        let msg = match form {
            InputForm::Funded => format!("cost sum F m = {cost} differs from 1"),
            InputForm::Overlay => format!("overlay is not zero-cost: sum h m = {}", cost - 1.0),
        };
        let mut c = CheckResult::new("budget", CheckStatus::Fail, msg);
        c.witness = vec![cost];
        c
    };
    checks.push(budget);
    let comonotone = check_comonotonicity(&payoff, &f, options.flat_tol)?;
    let agnostic = check_state_agnostic(&payoff, &f, options.tol)?;
    let (bond, bond_level) = check_bond_line(&payoff, &f, options.tol)?;
    let summary = ImpliedSummary::from_implied(&implied);

    let classification = if !comonotone.passed() {
        if summary.crossings_of_one >= 2 {
            Classification::IrrationalOscillation
        } else {
            Classification::RiskLovingSegments
        }
    } else if agnostic.status == CheckStatus::Fail || bond.status == CheckStatus::Fail {
        Classification::StateDependent
    } else {
        Classification::ConsistentRiskAverse
    };
    checks.push(comonotone);
    checks.push(agnostic);
    checks.push(bond);

    let mut notes = Vec::new();
    let is_bond = payoff
        .values()
        .iter()
        .all(|v| (v - 1.0).abs() <= options.tol);
    if is_bond {
        notes.push("bond: payoff is flat at the unit return".to_string());
    }
    if form == InputForm::Overlay {
        notes.push(
            "zero-cost overlay assumes a perfectly liquid two-way market in options on the underlying (not verified)"
                .to_string(),
        );
    }
    let recovered = if is_bond {
        None
    } else {
        recover_mean_variance(payoff.values(), f.values(), m.weights(), options.tol)
    };

    let budget_ok = checks[0].passed();
    let acceptable = budget_ok
        && match classification {
            Classification::ConsistentRiskAverse => true,
            Classification::StateDependent => !options.require_state_agnostic,
            _ => false,
        };

    Ok((
        ValidationReport {
            input_form: form,
            checks,
            classification,
            implied: summary,
            recovered_risk_aversion: recovered,
            bond_level,
            notes,
            acceptable,
        },
        implied,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Role;
    use crate::solver::{shimko_payoff, solve_elasticity_profile};

    fn curve(v: &[f64]) -> PayoffCurve {
        PayoffCurve::new(v.to_vec()).unwrap()
    }

    #[test]
    fn comonotonicity_cases() {
        let f = curve(&[0.5, 1.0, 2.0, 1.5]);
        assert!(check_comonotonicity(&f, &f, 0.0).unwrap().passed());
        let m = Distribution::new(vec![0.25; 4], Role::Market).unwrap();
        let solved = solve_elasticity_profile(&f, &[0.3, 2.0, 7.0], &m, false).unwrap();
        assert!(check_comonotonicity(&solved, &f, 1e-12).unwrap().passed());
        let bad = curve(&[0.5, 1.0, 0.9, 0.8]);
        let res = check_comonotonicity(&bad, &f, 1e-12).unwrap();
        assert_eq!(res.status, CheckStatus::Fail);
        assert_eq!(res.indices, vec![1]);
    }

    #[test]
    fn state_agnostic_cases() {
        let f = curve(&[0.5, 1.0, 2.0, 1.0]);
        let sqrt = curve(
            &f.values()
                .iter()
                .map(|v| v.sqrt() / 1.1)
                .collect::<Vec<_>>(),
        );
        assert!(check_state_agnostic(&sqrt, &f, 1e-8).unwrap().passed());
        assert!(
            check_state_agnostic(&curve(&[1.0; 4]), &curve(&[2.0; 4]), 1e-8)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn state_dependent_profile_is_detected() {
        // f_1 = f_3 != f_2; edges 1 and 2 get different risk aversion, so the
        // payoff lands on different values in buckets 1 and 3.
        let f = curve(&[0.8, 1.25, 0.8, 1.0]);
        let m = Distribution::new(vec![0.25; 4], Role::Market).unwrap();
        let payoff = solve_elasticity_profile(&f, &[1.0, 1.0, 4.0], &m, false).unwrap();
        let payoff2 = solve_elasticity_profile(&f, &[1.0, 4.0, 1.0], &m, false).unwrap();
        assert!(check_state_agnostic(&payoff, &f, 1e-8).unwrap().passed());
        let res = check_state_agnostic(&payoff2, &f, 1e-8).unwrap();
        assert_eq!(res.status, CheckStatus::Fail);
        assert_eq!(&res.indices[..2], &[0, 2]);
        assert!(!res.witness.is_empty());
    }

    #[test]
    fn bond_line_cases() {
        let f = curve(&[0.5, 0.8, 1.3, 2.0]);
        let (res, level) = check_bond_line(&f, &f, 1e-6).unwrap();
        assert_eq!(res.status, CheckStatus::Inconclusive);
        assert_eq!(level, None);

        let sqrt = curve(&f.values().iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        let (res, level) = check_bond_line(&sqrt, &f, 1e-6).unwrap();
        assert!(res.passed());
        assert!((level.unwrap() - 1.0).abs() < 1e-12);

        let dip = curve(&[2.0, 0.5, 0.8, 1.3, 2.0, 0.5]);
        let sqrt = curve(&dip.values().iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        let (res, level) = check_bond_line(&sqrt, &dip, 1e-6).unwrap();
        assert!(res.passed(), "{res:?}");
        assert!((level.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bond_line_detects_two_levels() {
        // Crosses f near 1 on the way up and near 1.6 on the way down.
        let f = curve(&[0.5, 1.2, 2.0, 1.8, 1.4]);
        let payoff = curve(&[0.7, 1.1, 1.9, 1.7, 1.5]);
        let (res, _) = check_bond_line(&payoff, &f, 1e-6).unwrap();
        assert_eq!(res.status, CheckStatus::Fail);
        assert_eq!(res.indices.len(), 2);
        assert!(res.witness[0] < 1.2 && res.witness[1] > 1.4);
    }

    #[test]
    fn tangency_is_inconclusive() {
        let f = curve(&[0.5, 1.0, 2.0]);
        let payoff = curve(&[0.6, 1.0, 2.2]);
        let (res, _) = check_bond_line(&payoff, &f, 1e-6).unwrap();
        assert_eq!(res.status, CheckStatus::Inconclusive);
    }

    #[test]
    fn audit_shimko_overlay() {
        let m = Distribution::new(vec![0.2, 0.3, 0.3, 0.2], Role::Market).unwrap();
        let b = Distribution::new(vec![0.1, 0.25, 0.35, 0.3], Role::Belief).unwrap();
        let h = shimko_payoff(&b, &m, 2.5).unwrap();
        let (report, _) =
            audit_product(&ProductInput::Overlay(h), &m, &b, &AuditOptions::default()).unwrap();
        assert_eq!(report.classification, Classification::ConsistentRiskAverse);
        assert!(report.acceptable);
        assert!((report.recovered_risk_aversion.unwrap() - 2.5).abs() < 1e-10);
        assert_eq!(report.input_form, InputForm::Overlay);
    }

    #[test]
    fn audit_bond() {
        let m = Distribution::new(vec![0.2, 0.3, 0.5], Role::Market).unwrap();
        let b = Distribution::new(vec![0.3, 0.3, 0.4], Role::Belief).unwrap();
        let (report, implied) = audit_product(
            &ProductInput::Funded(PayoffCurve::bond(3)),
            &m,
            &b,
            &AuditOptions::default(),
        )
        .unwrap();
        assert_eq!(report.classification, Classification::ConsistentRiskAverse);
        assert!(report.notes.iter().any(|n| n.starts_with("bond")));
        assert!(implied
            .values
            .iter()
            .all(|v| *v == ImpliedValue::Value(f64::INFINITY)));
        assert!(report.acceptable);
    }

    #[test]
    fn audit_rejects_negative_overlay_funding() {
        let m = Distribution::new(vec![0.5, 0.5], Role::Market).unwrap();
        let h = SignedCurve {
            values: vec![1.5, -1.5],
        };
        assert!(
            audit_product(&ProductInput::Overlay(h), &m, &m, &AuditOptions::default()).is_err()
        );
    }

    #[test]
    fn audit_fails_budget() {
        let m = Distribution::new(vec![0.5, 0.5], Role::Market).unwrap();
        let b = Distribution::new(vec![0.6, 0.4], Role::Belief).unwrap();
        let (report, _) = audit_product(
            &ProductInput::Funded(curve(&[2.4, 1.6])),
            &m,
            &b,
            &AuditOptions::default(),
        )
        .unwrap();
        assert!(!report.acceptable);
        assert_eq!(report.check("budget").unwrap().witness, vec![2.0]);
    }
}
