use crate::error::{ForgeError, Result};
use crate::market::{quoted_returns, same_len, Distribution, Role, SecurityQuotes};
use crate::numeric::{self, adaptive_simpson};
use crate::preferences::UtilitySpec;

use super::SolveSettings;

/// The exhaustive search is only meant for desk-scale checks.
pub const ORACLE_MAX_BUCKETS: usize = 5;

/// Upper bound on the number of simplex grid points visited.
const GRID_BUDGET: u64 = 2_000_000;
const REFINE_FLOOR: f64 = 1e-9;
const INTEGRATION_TOL: f64 = 1e-10;

/// `u(v)` of a utility, integrating `u'` from 0 when no closed form is
/// known. Any additive constant is irrelevant to the maximization.
fn utility(spec: &UtilitySpec, v: f64) -> Result<f64> {
    if let Some(u) = spec.utility(v) {
        return Ok(u);
    }
    let integrand = |s: f64| spec.marginal(s).unwrap_or(f64::NAN);
    adaptive_simpson(&integrand, 0.0, v, INTEGRATION_TOL).ok_or(ForgeError::Monotonicity {
        at: v,
        value: f64::NAN,
    })
}

/// Expected utility `sum_i b_i u(ln(beta_i r_i))` of an allocation.
pub fn expected_utility(
    belief: &Distribution,
    quotes: &SecurityQuotes,
    spec: &UtilitySpec,
    allocation: &[f64],
) -> Result<f64> {
    let returns = quoted_returns(quotes);
    objective(belief.weights(), &returns, spec, allocation)
}

fn objective(belief: &[f64], returns: &[f64], spec: &UtilitySpec, beta: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(beta.len());
    for ((w, r), b) in beta.iter().zip(returns).zip(belief) {
        terms.push(b * utility(spec, (w * r).ln())?);
    }
    Ok(numeric::sum(terms))
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Visits every interior point `k / divisions` of the simplex with
/// positive integer `k` summing to `divisions`.
fn for_each_composition<F: FnMut(&[u64]) -> Result<()>>(
    parts: usize,
    divisions: u64,
    visit: &mut F,
) -> Result<()> {
    fn recurse<F: FnMut(&[u64]) -> Result<()>>(
        slot: usize,
        remaining: u64,
        counts: &mut Vec<u64>,
        visit: &mut F,
    ) -> Result<()> {
        let left = (counts.len() - slot - 1) as u64;
        if left == 0 {
            counts[slot] = remaining;
            return visit(counts);
        }
        for k in 1..=(remaining - left) {
            counts[slot] = k;
            recurse(slot + 1, remaining - k, counts, visit)?;
        }
        Ok(())
    }
    let mut counts = vec![0u64; parts];
    recurse(0, divisions, &mut counts, visit)
}

/// Expected-utility maximizer found by exhaustive simplex search followed
/// by pairwise-transfer refinement. Independent of the optimality
/// conditions used by the other solvers.
///
/// The grid is coarsened beyond `oracle_grid_step` when the number of
/// simplex points would exceed two million.
pub fn brute_force_oracle(
    belief: &Distribution,
    quotes: &SecurityQuotes,
    spec: &UtilitySpec,
    settings: &SolveSettings,
) -> Result<Distribution> {
    same_len(quotes.len(), belief.len())?;
    settings.validate()?;
    spec.validate()?;
    let n = belief.len();
    if n > ORACLE_MAX_BUCKETS {
        return Err(ForgeError::OracleTooLarge {
            n,
            max: ORACLE_MAX_BUCKETS,
        });
    }
    let returns = quoted_returns(quotes);
    let b = belief.weights();

    let mut divisions = (1.0 / settings.oracle_grid_step).round().max(n as f64) as u64;
    while divisions > n as u64 && binomial(divisions - 1, n as u64 - 1) > GRID_BUDGET {
        divisions = divisions * 9 / 10;
    }

    let mut best = f64::NEG_INFINITY;
    let mut best_counts = vec![1u64; n];
    let scale = divisions as f64;
    let mut point = vec![0.0; n];
    for_each_composition(n, divisions, &mut |counts| {
        for (p, c) in point.iter_mut().zip(counts) {
            *p = *c as f64 / scale;
        }
        let value = objective(b, &returns, spec, &point)?;
        if value > best {
            best = value;
            best_counts.copy_from_slice(counts);
        }
        Ok(())
    })?;

    let mut beta: Vec<f64> = best_counts.iter().map(|c| *c as f64 / scale).collect();
    let mut delta = 1.0 / scale;
    let mut candidate = beta.clone();
    while delta >= REFINE_FLOOR {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                while beta[j] - delta > 0.0 {
                    candidate.copy_from_slice(&beta);
                    candidate[i] += delta;
                    candidate[j] -= delta;
                    let value = objective(b, &returns, spec, &candidate)?;
                    if value > best {
                        best = value;
                        beta.copy_from_slice(&candidate);
                        improved = true;
                    } else {
                        break;
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }

    let total = numeric::sum(beta.iter().copied());
    Distribution::new(beta.iter().map(|w| w / total).collect(), Role::Allocation)
}
