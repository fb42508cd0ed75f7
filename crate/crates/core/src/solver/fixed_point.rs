use crate::error::{ForgeError, Result};
use crate::market::{quoted_returns, same_len, Distribution, Role, SecurityQuotes};
use crate::numeric;
use crate::preferences::UtilitySpec;

use super::SolveSettings;

const MAX_HALVINGS: usize = 4;
const MAX_RATE: f64 = 0.999;

/// Result of [`fixed_point_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOutcome {
    pub allocation: Distribution,
    pub iterations: usize,
    /// Largest relative change in the last update.
    pub residual: f64,
    /// Damping in force when iteration stopped.
    pub damping: f64,
}

/// One application of the optimality map
/// `T_k(beta) = u'(ln(beta_k r_k)) b_k / sum_i u'(ln(beta_i r_i)) b_i`.
fn optimality_map(
    beta: &[f64],
    belief: &[f64],
    returns: &[f64],
    spec: &UtilitySpec,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(beta.len());
    for ((w, b), r) in beta.iter().zip(belief).zip(returns) {
        out.push(spec.marginal((w * r).ln())? * b);
    }
    let total = numeric::sum(out.iter().copied());
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// Damped Picard iteration for the expected-utility optimal allocation,
/// started from the belief.
///
/// The damping is halved (at most four times) whenever the residual grows.
/// Iteration stops once the estimated distance to the fixed point,
/// `delta / (1 - rho)` with `delta` the largest relative update and `rho`
/// the observed contraction rate, falls below `convergence_tol`. Relative
/// updates keep the payoff `beta / m` accurate in thin buckets.
pub fn fixed_point_iterate(
    belief: &Distribution,
    quotes: &SecurityQuotes,
    spec: &UtilitySpec,
    settings: &SolveSettings,
) -> Result<FixedPointOutcome> {
    same_len(quotes.len(), belief.len())?;
    settings.validate()?;
    spec.validate()?;
    let returns = quoted_returns(quotes);
    let b = belief.weights();

    let mut theta = settings.fixed_point_damping;
    let mut halvings = 0;
    let mut beta = b.to_vec();
    let mut previous_residual = f64::INFINITY;
    let mut previous_update = f64::INFINITY;
    let mut last_update = f64::INFINITY;

    for iteration in 1..=settings.max_iterations {
        let mapped = optimality_map(&beta, b, &returns, spec)?;
        let residual = numeric::max_abs_diff(&mapped, &beta);
        if residual > previous_residual {
            if halvings == MAX_HALVINGS {
                return Err(ForgeError::Divergence { halvings, residual });
            }
            halvings += 1;
            theta *= 0.5;
        }
        previous_residual = residual;

        let next: Vec<f64> = beta
            .iter()
            .zip(&mapped)
            .map(|(old, new)| (1.0 - theta) * old + theta * new)
            .collect();
        last_update = next
            .iter()
            .zip(&beta)
            .fold(0.0f64, |acc, (n, o)| acc.max((n - o).abs() / o));
        beta = next;
        let rho = if previous_update.is_finite() && previous_update > 0.0 {
            (last_update / previous_update).min(MAX_RATE)
        } else {
            0.0
        };
        previous_update = last_update;
        if last_update <= settings.convergence_tol * (1.0 - rho) {
            let total = numeric::sum(beta.iter().copied());
            for w in &mut beta {
                *w /= total;
            }
            if let Some(index) = beta.iter().position(|w| !(*w > 0.0)) {
                return Err(ForgeError::InvalidValue {
                    what: "allocation",
                    index,
                    value: beta[index],
                });
            }
            return Ok(FixedPointOutcome {
                allocation: Distribution::from_parts_unchecked(beta, Role::Allocation),
                iterations: iteration,
                residual: last_update,
                damping: theta,
            });
        }
    }
    Err(ForgeError::NonConvergence {
        iterations: settings.max_iterations,
        residual: last_update,
    })
}

/// Optimal allocation of a rational investor with utility `spec`.
pub fn solve_fixed_point(
    belief: &Distribution,
    quotes: &SecurityQuotes,
    spec: &UtilitySpec,
    settings: &SolveSettings,
) -> Result<Distribution> {
    fixed_point_iterate(belief, quotes, spec, settings).map(|o| o.allocation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{allocation_to_payoff, growth_optimal_payoff};
    use crate::solver::solve_elasticity_profile;

    fn dist(w: &[f64], role: Role) -> Distribution {
        Distribution::new(w.to_vec(), role).unwrap()
    }

    #[test]
    fn log_utility_is_kelly_in_one_step() {
        let b = dist(&[0.3, 0.5, 0.2], Role::Belief);
        let q = SecurityQuotes::new(vec![0.2, 0.5, 0.3]).unwrap();
        let out =
            fixed_point_iterate(&b, &q, &UtilitySpec::Log, &SolveSettings::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.allocation.weights(), b.weights());
    }

    #[test]
    fn no_view_is_fixed_point_for_any_utility() {
        let m = dist(&[0.2, 0.5, 0.3], Role::Market);
        let q = SecurityQuotes::from_distribution(&m);
        for spec in [
            UtilitySpec::ConstantRelative { r: 3.0 },
            UtilitySpec::ConstantAbsoluteOverF { a: 0.5 },
        ] {
            let beta = solve_fixed_point(&m, &q, &spec, &SolveSettings::default()).unwrap();
            for (x, y) in beta.weights().iter().zip(m.weights()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn agrees_with_elasticity_solver() {
        let m = dist(&[0.2, 0.5, 0.3], Role::Market);
        let b = dist(&[0.3, 0.5, 0.2], Role::Belief);
        let q = SecurityQuotes::from_distribution(&m);
        let f = growth_optimal_payoff(&b, &m).unwrap();
        for r in [0.5, 2.0, 5.0, 20.0] {
            let spec = UtilitySpec::ConstantRelative { r };
            let beta = solve_fixed_point(&b, &q, &spec, &SolveSettings::default()).unwrap();
            let fp = allocation_to_payoff(&beta, &q).unwrap();
            let el = solve_elasticity_profile(&f, &[r, r], &m, false).unwrap();
            for (x, y) in fp.values().iter().zip(el.values()) {
                assert!((x - y).abs() < 1e-8, "R={r}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let b = dist(&[0.3, 0.5, 0.2], Role::Belief);
        let q = SecurityQuotes::new(vec![0.2, 0.5, 0.3]).unwrap();
        let settings = SolveSettings {
            max_iterations: 2,
            ..SolveSettings::default()
        };
        let err = solve_fixed_point(&b, &q, &UtilitySpec::ConstantRelative { r: 0.5 }, &settings)
            .unwrap_err();
        assert!(
            matches!(err, ForgeError::NonConvergence { iterations: 2, residual } if residual > 0.0)
        );
    }

    #[test]
    fn monotonicity_violation_surfaces() {
        let b = dist(&[0.3, 0.5, 0.2], Role::Belief);
        let q = SecurityQuotes::new(vec![0.2, 0.5, 0.3]).unwrap();
        let spec = UtilitySpec::Custom(crate::preferences::CustomUtility::new(|v| v));
        assert!(matches!(
            solve_fixed_point(&b, &q, &spec, &SolveSettings::default()),
            Err(ForgeError::Monotonicity { .. })
        ));
    }
}
