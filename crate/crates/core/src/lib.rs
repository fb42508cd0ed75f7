//! Payoff structuring from a belief, a market of Arrow-Debreu securities and
//! a risk profile.
//!
//! The growth-optimal payoff `f = b / m` is the anchor; every other rational
//! payoff is obtained from it through the investor's relative risk
//! aversion, and any payoff can be audited against it.

pub mod error;
pub mod formats;
pub mod growth;
pub mod market;
pub mod numeric;
pub mod pipeline;
pub mod preferences;
pub mod solver;
pub mod validation;

pub use error::{ForgeError, Result};
pub use formats::{FormatError, ProductSpecFile, RiskProfileSpec};
pub use growth::{
    allocation_to_payoff, growth_optimal_payoff, payoff_cost, payoff_to_allocation, PayoffCurve,
    SignedCurve,
};
pub use market::{
    imply_market_distribution, quoted_returns, validate_distribution, Distribution, Mesh, Role,
    SecurityQuotes, ValidationOutcome,
};
pub use pipeline::{solve_product, Product, RiskChoice, RunManifest, SolveOutcome};
pub use preferences::{
    one_param_profile, relative_risk_aversion, CustomUtility, FunctionProfile, RiskAversionProfile,
    UtilityFamily, UtilitySpec,
};
pub use solver::{
    brute_force_oracle, calibrate_max_loss, fixed_point_iterate, implied_risk_aversion,
    one_param_payoff, shimko_oracle, shimko_payoff, shoot_state_agnostic, solve_elasticity_profile,
    solve_elasticity_state_agnostic, solve_fixed_point, ImpliedRiskAversion, ImpliedValue,
    SolveSettings,
};
pub use validation::{audit_product, AuditOptions, Classification, ProductInput, ValidationReport};
