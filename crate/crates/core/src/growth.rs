//! Growth-optimal (Kelly) accounting: allocations, payoffs and their cost
//! against the market-implied distribution.

use crate::error::{ForgeError, Result};
use crate::market::{same_len, Distribution, Role, SecurityQuotes};
use crate::numeric;

/// Budget tolerance accepted by [`payoff_to_allocation`].
pub const ALLOCATION_BUDGET_TOLERANCE: f64 = 1e-8;

/// Tolerance under which a payoff counts as budget-normalized.
pub const BUDGET_TOLERANCE: f64 = 1e-10;

/// Strictly positive return multiple per bucket, per unit of invested capital.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffCurve {
    values: Vec<f64>,
}

impl PayoffCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(ForgeError::TooFewBuckets(values.len()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ForgeError::InvalidValue {
                    what: "payoff",
                    index: i,
                    value: v,
                });
            }
        }
        Ok(Self { values })
    }

    /// The bond: `F = 1` in every bucket.
    pub fn bond(buckets: usize) -> Self {
        Self {
            values: vec![1.0; buckets],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_budget_normalized(&self, m: &Distribution) -> bool {
        self.len() == m.len() && (payoff_cost(self, m) - 1.0).abs() <= BUDGET_TOLERANCE
    }
}

/// Signed zero-cost overlay `h`; its funded form is `h + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedCurve {
    pub values: Vec<f64>,
}

impl SignedCurve {
    pub fn funded(&self) -> Result<PayoffCurve> {
        for (i, &h) in self.values.iter().enumerate() {
            if !(h + 1.0 > 0.0) {
                return Err(ForgeError::OverlayPositivity {
                    index: i,
                    value: h + 1.0,
                });
            }
        }
        PayoffCurve::new(self.values.iter().map(|h| h + 1.0).collect())
    }
}

/// Growth-optimal payoff `f_k = b_k / m_k`.
pub fn growth_optimal_payoff(b: &Distribution, m: &Distribution) -> Result<PayoffCurve> {
    same_len(m.len(), b.len())?;
    PayoffCurve::new(
        b.weights()
            .iter()
            .zip(m.weights())
            .map(|(b, m)| b / m)
            .collect(),
    )
}

/// Payoff of an allocation: `F_k = beta_k / p_k`.
pub fn allocation_to_payoff(beta: &Distribution, quotes: &SecurityQuotes) -> Result<PayoffCurve> {
    same_len(quotes.len(), beta.len())?;
    PayoffCurve::new(
        beta.weights()
            .iter()
            .zip(quotes.prices())
            .map(|(b, p)| b / p)
            .collect(),
    )
}

/// Allocation backing a budget-normalized payoff: `beta_k = F_k m_k`.
///
/// Cost deviations up to [`ALLOCATION_BUDGET_TOLERANCE`] are absorbed by
/// renormalizing; anything larger is a [`ForgeError::BudgetViolation`].
pub fn payoff_to_allocation(payoff: &PayoffCurve, m: &Distribution) -> Result<Distribution> {
    same_len(m.len(), payoff.len())?;
    let cost = payoff_cost(payoff, m);
    if !((cost - 1.0).abs() <= ALLOCATION_BUDGET_TOLERANCE) {
        return Err(ForgeError::BudgetViolation { cost });
    }
    let beta: Vec<f64> = payoff
        .values()
        .iter()
        .zip(m.weights())
        .map(|(f, m)| f * m / cost)
        .collect();
    Distribution::new(beta, Role::Allocation)
}

/// Cost of a payoff against the market: `sum_k F_k m_k`.
pub fn payoff_cost(payoff: &PayoffCurve, m: &Distribution) -> f64 {
    numeric::dot(payoff.values(), m.weights())
}

/// Rescales a positive curve so that it costs exactly one unit.
pub(crate) fn normalize_budget(values: &mut [f64], m: &Distribution) -> f64 {
    let cost = numeric::dot(values, m.weights());
    for v in values.iter_mut() {
        *v /= cost;
    }
    cost
}
