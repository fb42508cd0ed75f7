//! Python bindings: products, solves, implied risk aversion and audits.

use std::path::PathBuf;

use payoff_forge_core::formats::{parse_family_flag, to_json, FormatError};
use payoff_forge_core::pipeline::{
    solve_product, validate_product, AuditSubject, Product as CoreProduct, RiskChoice, SolveOutcome,
};
use payoff_forge_core::{
    solver, AuditOptions, Distribution, ForgeError, ImpliedRiskAversion, ImpliedValue, PayoffCurve,
    ProductSpecFile, Role, SecurityQuotes, SolveSettings, ValidationReport as CoreReport,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(payoff_forge, PayoffForgeError, PyException);
create_exception!(payoff_forge, SolverError, PayoffForgeError);

fn to_py(e: FormatError) -> PyErr {
    if e.is_solver_failure() {
        SolverError::new_err(e.to_string())
    } else {
        PayoffForgeError::new_err(e.to_string())
    }
}

fn forge(e: ForgeError) -> PyErr {
    to_py(e.into())
}

fn dist(weights: Vec<f64>, role: Role) -> PyResult<Distribution> {
    Distribution::new(weights, role).map_err(forge)
}

fn curve(values: Vec<f64>) -> PyResult<PayoffCurve> {
    PayoffCurve::new(values).map_err(forge)
}

/// `inf` for a bond-like edge, `nan` where the edge is indeterminate.
fn implied_floats(implied: &ImpliedRiskAversion) -> Vec<f64> {
    implied
        .values
        .iter()
        .map(|v| match v {
            ImpliedValue::Value(r) => *r,
            ImpliedValue::Indeterminate => f64::NAN,
        })
        .collect()
}

fn kebab<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Normalized market distribution `m = p / sum(p)`.
#[pyfunction]
fn imply_market_distribution(prices: Vec<f64>) -> PyResult<Vec<f64>> {
    let quotes = SecurityQuotes::new(prices).map_err(forge)?;
    Ok(payoff_forge_core::imply_market_distribution(&quotes)
        .map_err(forge)?
        .into_weights())
}

/// Growth-optimal payoff `f = b / m`.
#[pyfunction]
fn growth_optimal_payoff(belief: Vec<f64>, market: Vec<f64>) -> PyResult<Vec<f64>> {
    let b = dist(belief, Role::Belief)?;
    let m = dist(market, Role::Market)?;
    Ok(payoff_forge_core::growth_optimal_payoff(&b, &m)
        .map_err(forge)?
        .into_values())
}

/// Payoff for a risk-aversion profile given on the interior edges.
#[pyfunction]
#[pyo3(signature = (f, profile, market, allow_gambling = false))]
fn solve_elasticity_profile(
    f: Vec<f64>,
    profile: Vec<f64>,
    market: Vec<f64>,
    allow_gambling: bool,
) -> PyResult<Vec<f64>> {
    let m = dist(market, Role::Market)?;
    Ok(
        solver::solve_elasticity_profile(&curve(f)?, &profile, &m, allow_gambling)
            .map_err(forge)?
            .into_values(),
    )
}

/// Payoff maximizing expected utility of a named family, e.g. `"crra:2"`.
#[pyfunction]
fn solve_family(f: Vec<f64>, family: &str, market: Vec<f64>) -> PyResult<Vec<f64>> {
    let spec = payoff_forge_core::UtilitySpec::from(parse_family_flag(family).map_err(to_py)?);
    let m = dist(market, Role::Market)?;
    Ok(solver::solve_elasticity_state_agnostic(
        &curve(f)?,
        (&spec).into(),
        &m,
        &SolveSettings::default(),
    )
    .map_err(forge)?
    .into_values())
}

/// `F = (f - 1) / a + 1`.
#[pyfunction]
fn one_param_payoff(f: Vec<f64>, a: f64) -> PyResult<Vec<f64>> {
    Ok(solver::one_param_payoff(&curve(f)?, a)
        .map_err(forge)?
        .into_values())
}

/// The `a` whose affine payoff bottoms out at `floor`.
#[pyfunction]
fn calibrate_max_loss(f: Vec<f64>, floor: f64) -> PyResult<f64> {
    solver::calibrate_max_loss(&curve(f)?, floor).map_err(forge)
}

/// Zero-cost mean-variance overlay `h = (f - 1) / R_a`.
#[pyfunction]
fn shimko_payoff(belief: Vec<f64>, market: Vec<f64>, risk_aversion: f64) -> PyResult<Vec<f64>> {
    let b = dist(belief, Role::Belief)?;
    let m = dist(market, Role::Market)?;
    Ok(solver::shimko_payoff(&b, &m, risk_aversion)
        .map_err(forge)?
        .values)
}

/// Implied relative risk aversion on the interior edges.
#[pyfunction]
fn implied_risk_aversion(payoff: Vec<f64>, f: Vec<f64>) -> PyResult<Vec<f64>> {
    let implied = solver::implied_risk_aversion(&curve(payoff)?, &curve(f)?).map_err(forge)?;
    Ok(implied_floats(&implied))
}

#[pyclass(frozen, module = "payoff_forge")]
struct ValidationReport {
    inner: CoreReport,
}

#[pymethods]
impl ValidationReport {
    #[getter]
    fn acceptable(&self) -> bool {
        self.inner.acceptable
    }

    #[getter]
    fn classification(&self) -> String {
        kebab(&self.inner.classification)
    }

    #[getter]
    fn recovered_risk_aversion(&self) -> Option<f64> {
        self.inner.recovered_risk_aversion
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.inner.notes.clone()
    }

    /// Check name to status (`pass`, `fail` or `inconclusive`).
    #[getter]
    fn checks(&self) -> Vec<(String, String)> {
        self.inner
            .checks
            .iter()
            .map(|c| (c.name.clone(), kebab(&c.status)))
            .collect()
    }

    fn text(&self) -> String {
        self.inner.render_text()
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "ValidationReport(acceptable={}, classification='{}')",
            if self.inner.acceptable {
                "True"
            } else {
                "False"
            },
            self.classification()
        )
    }
}

#[pyclass(frozen, module = "payoff_forge")]
struct SolveResult {
    outcome: SolveOutcome,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn payoff(&self) -> Vec<f64> {
        self.outcome.payoff.values().to_vec()
    }

    #[getter]
    fn growth_optimal(&self) -> Vec<f64> {
        self.outcome.growth_optimal.values().to_vec()
    }

    #[getter]
    fn implied_risk_aversion(&self) -> Vec<f64> {
        implied_floats(&self.outcome.implied)
    }

    #[getter]
    fn cost_residual(&self) -> f64 {
        self.outcome.manifest.cost_residual
    }

    #[getter]
    fn calibrated_a(&self) -> Option<f64> {
        self.outcome.manifest.calibrated_a
    }

    #[getter]
    fn report(&self) -> ValidationReport {
        ValidationReport {
            inner: self.outcome.report.clone(),
        }
    }

    fn manifest_json(&self) -> String {
        to_json(&self.outcome.manifest)
    }
}

/// A mesh, market and belief, optionally with a risk profile and a payoff.
#[pyclass(frozen, module = "payoff_forge")]
struct Product {
    inner: CoreProduct,
}

#[pymethods]
impl Product {
    /// Loads a product file; profile file references resolve next to it.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CoreProduct::load(&path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = ProductSpecFile::parse(text, "<json>").map_err(to_py)?;
        Ok(Self {
            inner: CoreProduct::from_spec(&spec, None).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.inner.name.clone()
    }

    #[getter]
    fn mesh(&self) -> Vec<f64> {
        self.inner.mesh.edges().to_vec()
    }

    #[getter]
    fn market(&self) -> Vec<f64> {
        self.inner.market.weights().to_vec()
    }

    #[getter]
    fn belief(&self) -> Vec<f64> {
        self.inner.belief.weights().to_vec()
    }

    #[getter]
    fn payoff(&self) -> Option<Vec<f64>> {
        self.inner.payoff.clone()
    }

    fn growth_optimal(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.growth_optimal().map_err(to_py)?.into_values())
    }

    /// Solves with at most one of the keyword risk specifications, falling
    /// back to the product's own.
    #[pyo3(signature = (*, family = None, profile = None, a = None, max_loss = None, allow_gambling = false))]
    fn solve(
        &self,
        family: Option<&str>,
        profile: Option<Vec<f64>>,
        a: Option<f64>,
        max_loss: Option<f64>,
        allow_gambling: bool,
    ) -> PyResult<SolveResult> {
        let mut chosen = Vec::new();
        if let Some(name) = family {
            chosen.push(RiskChoice::Family(parse_family_flag(name).map_err(to_py)?));
        }
        if let Some(values) = profile {
            chosen.push(RiskChoice::ProfileOfX {
                values,
                allow_gambling,
            });
        }
        if let Some(a) = a {
            chosen.push(RiskChoice::OneParam { a });
        }
        if let Some(floor) = max_loss {
            chosen.push(RiskChoice::MaxLoss { floor });
        }
        if chosen.len() > 1 {
            return Err(PyValueError::new_err(
                "give at most one of family, profile, a, max_loss",
            ));
        }
        let risk = self.inner.select_risk(chosen.pop()).map_err(to_py)?;
        let outcome =
            solve_product(&self.inner, &risk, &SolveSettings::default()).map_err(to_py)?;
        Ok(SolveResult { outcome })
    }

    fn implied_risk_aversion(&self, payoff: Vec<f64>) -> PyResult<Vec<f64>> {
        let implied =
            payoff_forge_core::pipeline::imply_product(&self.inner, &payoff).map_err(to_py)?;
        Ok(implied_floats(&implied))
    }

    /// Audits a funded payoff or a zero-cost overlay; with neither, the
    /// product's own payoff or overlay.
    #[pyo3(signature = (*, payoff = None, overlay = None, require_state_agnostic = false))]
    fn validate(
        &self,
        payoff: Option<Vec<f64>>,
        overlay: Option<Vec<f64>>,
        require_state_agnostic: bool,
    ) -> PyResult<ValidationReport> {
        let payoff = payoff.or_else(|| self.inner.payoff.clone());
        let overlay = overlay.or_else(|| self.inner.overlay.clone());
        let subject = match (&payoff, &overlay) {
            (Some(p), None) => AuditSubject::Payoff(p),
            (None, Some(h)) => AuditSubject::Overlay(h),
            _ => {
                return Err(PyValueError::new_err(
                    "give exactly one of payoff or overlay",
                ))
            }
        };
        let options = AuditOptions {
            require_state_agnostic,
            ..AuditOptions::default()
        };
        let (inner, _) = validate_product(&self.inner, subject, &options).map_err(to_py)?;
        Ok(ValidationReport { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Product(name={:?}, buckets={})",
            self.inner.name.as_deref().unwrap_or(""),
            self.inner.mesh.buckets()
        )
    }
}

#[pymodule]
fn payoff_forge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", payoff_forge_core::pipeline::VERSION)?;
    m.add("PayoffForgeError", m.py().get_type::<PayoffForgeError>())?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<Product>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<ValidationReport>()?;
    m.add_function(wrap_pyfunction!(imply_market_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(growth_optimal_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(solve_elasticity_profile, m)?)?;
    m.add_function(wrap_pyfunction!(solve_family, m)?)?;
    m.add_function(wrap_pyfunction!(one_param_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_max_loss, m)?)?;
    m.add_function(wrap_pyfunction!(shimko_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(implied_risk_aversion, m)?)?;
    Ok(())
}
