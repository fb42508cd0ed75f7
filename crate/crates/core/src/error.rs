use thiserror::Error;

/// Errors raised by the structuring engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForgeError {
    #[error("rejected input: {what} at bucket {index} ({value})")]
    InvalidValue {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("mesh needs at least 2 buckets, got {0}")]
    TooFewBuckets(usize),

    #[error("mesh edges must be strictly increasing (edge {index})")]
    UnorderedMesh { index: usize },

    #[error("length mismatch: expected {expected}, found {found} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),

    #[error("payoff is not budget-normalized: cost = {cost}")]
    BudgetViolation { cost: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("risk-loving input: R = {value} at edge {edge} (pass allow_gambling to accept R < 0)")]
    RiskLovingInput { edge: usize, value: f64 },

    #[error("zero risk aversion at edge {edge}: payoff elasticity undefined")]
    ZeroRiskAversion { edge: usize },

    #[error("monotonicity violation: marginal utility u'({at}) = {value} is not positive")]
    Monotonicity { at: f64, value: f64 },

    #[error("payoff accumulation overflowed at bucket {index}; consider flooring the risk-aversion profile")]
    Overflow { index: usize },

    #[error("payoff positivity violated: smallest admissible a is {min_admissible_a}")]
    PositivityViolation { min_admissible_a: f64 },

    #[error("overlay funded form F = h + 1 is non-positive at bucket {index} ({value})")]
    OverlayPositivity { index: usize, value: f64 },

    #[error("shooting bracket does not straddle the budget root: cost(low) = {low_cost}, cost(high) = {high_cost}")]
    BracketNotStraddling { low_cost: f64, high_cost: f64 },

    #[error("elasticity step diverged at edge {edge}")]
    StepDivergence { edge: usize },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(
        "fixed-point iteration diverged after {halvings} damping halvings (residual {residual:e})"
    )]
    Divergence { halvings: usize, residual: f64 },

    #[error("brute-force oracle supports at most {max} buckets, got {n}; use solve_fixed_point")]
    OracleTooLarge { n: usize, max: usize },

    #[error("singular linear system")]
    SingularSystem,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl ForgeError {
    /// True for failures of a numerical solver (as opposed to rejected inputs).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            ForgeError::Overflow { .. }
                | ForgeError::BracketNotStraddling { .. }
                | ForgeError::StepDivergence { .. }
                | ForgeError::NonConvergence { .. }
                | ForgeError::Divergence { .. }
                | ForgeError::SingularSystem
                | ForgeError::Monotonicity { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, ForgeError>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ForgeError::LengthMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
