//! Forward solvers (risk aversion to payoff), the inverse diagnostic (payoff
//! to implied risk aversion), closed-form families and brute-force oracles.

mod elasticity;
mod family;
mod fixed_point;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::market::Mesh;

pub use elasticity::{
    implied_risk_aversion, relative_elasticity, shoot_state_agnostic, solve_elasticity_profile,
    solve_elasticity_state_agnostic, ShootingOutcome, StateAgnosticRisk,
};
pub use family::{calibrate_max_loss, one_param_payoff, shimko_oracle, shimko_payoff};
pub use fixed_point::{fixed_point_iterate, solve_fixed_point, FixedPointOutcome};
pub use oracle::{brute_force_oracle, expected_utility, ORACLE_MAX_BUCKETS};

/// Numerical settings shared by the iterative solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    /// Picard damping `theta` in `(0, 1]`.
    pub fixed_point_damping: f64,
    /// Max-norm update on the allocation below which iteration stops.
    pub convergence_tol: f64,
    pub max_iterations: usize,
    /// Search interval for the first bucket's payoff when shooting.
    pub shooting_bracket: [f64; 2],
    /// Allowed budget residual `|sum F m - 1|` when shooting.
    pub shooting_tol: f64,
    pub oracle_grid_step: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            fixed_point_damping: 0.5,
            convergence_tol: 1e-10,
            max_iterations: 10_000,
            shooting_bracket: [1e-6, 1e6],
            shooting_tol: 1e-12,
            oracle_grid_step: 1e-3,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ForgeError::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive",
                })
            }
        };
        positive("fixed_point_damping", self.fixed_point_damping)?;
        if self.fixed_point_damping > 1.0 {
            return Err(ForgeError::InvalidParameter {
                name: "fixed_point_damping",
                value: self.fixed_point_damping,
                reason: "must not exceed 1",
            });
        }
        positive("convergence_tol", self.convergence_tol)?;
        positive("shooting_tol", self.shooting_tol)?;
        positive("oracle_grid_step", self.oracle_grid_step)?;
        positive("shooting_bracket[0]", self.shooting_bracket[0])?;
        positive("shooting_bracket[1]", self.shooting_bracket[1])?;
        if self.shooting_bracket[0] >= self.shooting_bracket[1] {
            return Err(ForgeError::InvalidParameter {
                name: "shooting_bracket",
                value: self.shooting_bracket[1],
                reason: "upper end must exceed lower end",
            });
        }
        if self.max_iterations == 0 {
            return Err(ForgeError::InvalidParameter {
                name: "max_iterations",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

/// Edgewise risk aversion read off a payoff. `Value` may be `+inf` (payoff
/// frozen across the edge) or negative (payoff moves against `f`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImpliedValue {
    Value(f64),
    /// Neither the payoff nor the reference moves across the edge.
    Indeterminate,
}

impl ImpliedValue {
    pub fn value(self) -> Option<f64> {
        match self {
            ImpliedValue::Value(v) => Some(v),
            ImpliedValue::Indeterminate => None,
        }
    }
}

/// Risk aversion `R_{k,k+1}` for each edge between adjacent buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedRiskAversion {
    pub values: Vec<ImpliedValue>,
}

impl ImpliedRiskAversion {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pairs each value with the interior mesh edge it belongs to.
    pub fn at_mesh<'a>(&'a self, mesh: &'a Mesh) -> impl Iterator<Item = (f64, ImpliedValue)> + 'a {
        mesh.interior_edges()
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn has_negative(&self) -> bool {
        self.values
            .iter()
            .any(|v| matches!(v, ImpliedValue::Value(r) if *r < 0.0))
    }

    /// Number of times the profile crosses `level`, skipping indeterminate
    /// edges.
    pub fn crossings(&self, level: f64) -> usize {
        let mut last: Option<bool> = None;
        let mut count = 0;
        for v in &self.values {
            let ImpliedValue::Value(r) = v else { continue };
            if *r == level {
                continue;
            }
            let above = *r > level;
            if let Some(prev) = last {
                if prev != above {
                    count += 1;
                }
            }
            last = Some(above);
        }
        count
    }
}
