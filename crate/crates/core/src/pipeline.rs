//! End-to-end structuring runs: product file in, payoff, diagnostics and a
//! reproducibility manifest out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ForgeError;
use crate::formats::{
    edges_match, read_file, read_risk_csv, Extended, FormatError, FormatResult, InlineProfile,
    MarkedSeries, MaxLoss, OneParam, ProductSpecFile, RiskProfileSpec,
};
use crate::growth::{growth_optimal_payoff, payoff_cost, PayoffCurve, SignedCurve};
use crate::market::{imply_market_distribution, Distribution, Mesh, Role, SecurityQuotes};
use crate::preferences::{UtilityFamily, UtilitySpec};
use crate::solver::{
    calibrate_max_loss, implied_risk_aversion, one_param_payoff, shoot_state_agnostic,
    solve_elasticity_profile, ImpliedRiskAversion, SolveSettings,
};
use crate::validation::{audit_product, AuditOptions, ProductInput, ValidationReport};

pub const TOOL_NAME: &str = "payoff-forge";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Validated product: mesh, market and belief, plus whatever optional
/// pieces the file carried.
#[derive(Debug, Clone)]
pub struct Product {
    pub name: Option<String>,
    pub mesh: Mesh,
    pub quotes: Option<SecurityQuotes>,
    pub market: Distribution,
    pub belief: Distribution,
    pub risk: Option<RiskChoice>,
    pub payoff: Option<Vec<f64>>,
    pub overlay: Option<Vec<f64>>,
}

/// Resolved risk specification.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskChoice {
    Family(UtilityFamily),
    ProfileOfX {
        values: Vec<f64>,
        allow_gambling: bool,
    },
    OneParam {
        a: f64,
    },
    MaxLoss {
        floor: f64,
    },
}

impl RiskChoice {
    /// Reads profile files relative to `base_dir`; without one, file
    /// references are refused.
    pub fn from_spec(
        spec: &RiskProfileSpec,
        mesh: &Mesh,
        base_dir: Option<&Path>,
    ) -> FormatResult<Self> {
        Ok(match spec {
            RiskProfileSpec::Family(f) => RiskChoice::Family(*f),
            RiskProfileSpec::Inline(p) => RiskChoice::ProfileOfX {
                values: p.values.iter().map(|v| v.0).collect(),
                allow_gambling: p.allow_gambling,
            },
            RiskProfileSpec::File(p) => {
                let base = base_dir.ok_or_else(|| {
                    FormatError::Invalid(
                        "risk profile file references are not available here; inline the values"
                            .to_string(),
                    )
                })?;
                let path = base.join(&p.file);
                let table = read_risk_csv(&read_file(&path)?, &path.display().to_string())?;
                RiskChoice::ProfileOfX {
                    values: table.profile_for(mesh)?,
                    allow_gambling: p.allow_gambling,
                }
            }
            RiskProfileSpec::OneParam(OneParam { a }) => RiskChoice::OneParam { a: *a },
            RiskProfileSpec::MaxLoss(MaxLoss { max_loss }) => {
                RiskChoice::MaxLoss { floor: *max_loss }
            }
        })
    }

    pub fn to_spec(&self) -> RiskProfileSpec {
        match self {
            RiskChoice::Family(f) => RiskProfileSpec::Family(*f),
            RiskChoice::ProfileOfX {
                values,
                allow_gambling,
            } => RiskProfileSpec::Inline(InlineProfile {
                values: values.iter().copied().map(Extended).collect(),
                allow_gambling: *allow_gambling,
            }),
            RiskChoice::OneParam { a } => RiskProfileSpec::OneParam(OneParam { a: *a }),
            RiskChoice::MaxLoss { floor } => RiskProfileSpec::MaxLoss(MaxLoss { max_loss: *floor }),
        }
    }
}

fn check_buckets(what: &'static str, mesh: &Mesh, found: usize) -> FormatResult<()> {
    if found == mesh.buckets() {
        Ok(())
    } else {
        Err(ForgeError::LengthMismatch {
            what,
            expected: mesh.buckets(),
            found,
        }
        .into())
    }
}

impl Product {
    pub fn from_spec(spec: &ProductSpecFile, base_dir: Option<&Path>) -> FormatResult<Self> {
        let mesh = Mesh::new(spec.mesh.clone())?;
        let (quotes, market) = match (&spec.prices, &spec.market) {
            (Some(prices), None) => {
                check_buckets("prices", &mesh, prices.len())?;
                let quotes = SecurityQuotes::new(prices.clone())?;
                let market = imply_market_distribution(&quotes)?;
                (Some(quotes), market)
            }
            (None, Some(market)) => {
                check_buckets("market", &mesh, market.len())?;
                (None, Distribution::new(market.clone(), Role::Market)?)
            }
            _ => {
                return Err(FormatError::Invalid(
                    "product needs exactly one of \"prices\" or \"market\"".to_string(),
                ))
            }
        };
        check_buckets("belief", &mesh, spec.belief.len())?;
        let belief = Distribution::new(spec.belief.clone(), Role::Belief)?;
        let risk = spec
            .risk_profile
            .as_ref()
            .map(|r| RiskChoice::from_spec(r, &mesh, base_dir))
            .transpose()?;
        if let Some(p) = &spec.payoff {
            check_buckets("payoff", &mesh, p.len())?;
        }
        if let Some(h) = &spec.overlay {
            check_buckets("overlay", &mesh, h.len())?;
        }
        Ok(Self {
            name: spec.name.clone(),
            mesh,
            quotes,
            market,
            belief,
            risk,
            payoff: spec.payoff.clone(),
            overlay: spec.overlay.clone(),
        })
    }

    pub fn load(path: &Path) -> FormatResult<Self> {
        let (spec, base) = ProductSpecFile::load(path)?;
        Self::from_spec(&spec, Some(&base))
    }

    pub fn growth_optimal(&self) -> FormatResult<PayoffCurve> {
        Ok(growth_optimal_payoff(&self.belief, &self.market)?)
    }

    /// Picks the single risk specification from an override (command-line
    /// flag or request field) and the product's own.
    pub fn select_risk(&self, chosen: Option<RiskChoice>) -> FormatResult<RiskChoice> {
        match (chosen, &self.risk) {
            (Some(_), Some(_)) => Err(FormatError::Invalid(
                "risk specified both in the product and separately; give exactly one".to_string(),
            )),
            (Some(r), None) => Ok(r),
            (None, Some(r)) => Ok(r.clone()),
            (None, None) => Err(FormatError::Invalid(
                "no risk specification: give a family, a profile, a or max_loss".to_string(),
            )),
        }
    }

    /// Payoff curve of the same length as the mesh.
    pub fn curve(&self, values: &[f64]) -> FormatResult<PayoffCurve> {
        check_buckets("payoff", &self.mesh, values.len())?;
        Ok(PayoffCurve::new(values.to_vec())?)
    }

    /// Checks that a curve read from a file sits on the product's mesh.
    pub fn check_mesh(&self, other: &Mesh) -> FormatResult<()> {
        if edges_match(self.mesh.edges(), other.edges()) {
            Ok(())
        } else {
            Err(FormatError::Invalid(format!(
                "mesh mismatch: curve has {} buckets on [{}, {}], product has {} on [{}, {}]",
                other.buckets(),
                other.edges()[0],
                other.edges()[other.buckets()],
                self.mesh.buckets(),
                self.mesh.edges()[0],
                self.mesh.edges()[self.mesh.buckets()],
            )))
        }
    }
}

/// Everything needed to reproduce a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<String>,
    pub buckets: usize,
    pub risk: RiskProfileSpec,
    /// `a` derived from a max-loss target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated_a: Option<f64>,
    pub solver: String,
    pub settings: SolveSettings,
    /// `sum F m - 1` of the emitted payoff.
    pub cost_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisections: Option<usize>,
    /// Output files written alongside, by role.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub outputs: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub growth_optimal: PayoffCurve,
    pub payoff: PayoffCurve,
    pub implied: ImpliedRiskAversion,
    pub manifest: RunManifest,
    pub report: ValidationReport,
}

/// Solves a product for one risk specification and audits the result.
pub fn solve_product(
    product: &Product,
    risk: &RiskChoice,
    settings: &SolveSettings,
) -> FormatResult<SolveOutcome> {
    settings.validate()?;
    let f = product.growth_optimal()?;
    let m = &product.market;
    let mut calibrated_a = None;
    let mut bisections = None;
    let (payoff, solver) = match risk {
        RiskChoice::Family(UtilityFamily::Log) => (f.clone(), "growth_optimal"),
        RiskChoice::Family(family) => {
            let spec = UtilitySpec::from(*family);
            let out = shoot_state_agnostic(&f, (&spec).into(), m, settings)?;
            bisections = Some(out.bisections);
            (out.payoff, "elasticity_state_agnostic")
        }
        RiskChoice::ProfileOfX {
            values,
            allow_gambling,
        } => (
            solve_elasticity_profile(&f, values, m, *allow_gambling)?,
            "elasticity_profile",
        ),
        RiskChoice::OneParam { a } => (one_param_payoff(&f, *a)?, "one_param_family"),
        RiskChoice::MaxLoss { floor } => {
            let a = calibrate_max_loss(&f, *floor)?;
            calibrated_a = Some(a);
            (one_param_payoff(&f, a)?, "one_param_family")
        }
    };
    let implied = implied_risk_aversion(&payoff, &f)?;
    let (report, _) = audit_product(
        &ProductInput::Funded(payoff.clone()),
        m,
        &product.belief,
        &AuditOptions::default(),
    )?;
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: VERSION.to_string(),
        product: product.name.clone(),
        buckets: product.mesh.buckets(),
        risk: risk.to_spec(),
        calibrated_a,
        solver: solver.to_string(),
        settings: settings.clone(),
        cost_residual: payoff_cost(&payoff, m) - 1.0,
        bisections,
        outputs: Default::default(),
    };
    Ok(SolveOutcome {
        growth_optimal: f,
        payoff,
        implied,
        manifest,
        report,
    })
}

/// Implied risk aversion of a payoff against the product's growth-optimal
/// payoff.
pub fn imply_product(product: &Product, payoff: &[f64]) -> FormatResult<ImpliedRiskAversion> {
    let payoff = product.curve(payoff)?;
    Ok(implied_risk_aversion(&payoff, &product.growth_optimal()?)?)
}

pub enum AuditSubject<'a> {
    Payoff(&'a [f64]),
    Overlay(&'a [f64]),
}

pub fn validate_product(
    product: &Product,
    subject: AuditSubject<'_>,
    options: &AuditOptions,
) -> FormatResult<(ValidationReport, ImpliedRiskAversion)> {
    let input = match subject {
        AuditSubject::Payoff(p) => ProductInput::Funded(product.curve(p)?),
        AuditSubject::Overlay(h) => {
            check_buckets("overlay", &product.mesh, h.len())?;
            ProductInput::Overlay(SignedCurve { values: h.to_vec() })
        }
    };
    Ok(audit_product(
        &input,
        &product.market,
        &product.belief,
        options,
    )?)
}

/// Body of a solve request: the product file plus optional risk and
/// settings overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub product: ProductSpecFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SolveSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResponse {
    pub mesh: Vec<f64>,
    pub growth_optimal: Vec<f64>,
    pub payoff: Vec<f64>,
    pub implied_risk_aversion: MarkedSeries,
    pub cost_residual: f64,
    pub manifest: RunManifest,
    pub validation: ValidationReport,
}

impl SolveRequest {
    pub fn run(&self) -> FormatResult<SolveResponse> {
        let product = Product::from_spec(&self.product, None)?;
        let risk = self
            .risk
            .as_ref()
            .map(|r| RiskChoice::from_spec(r, &product.mesh, None))
            .transpose()?;
        let risk = product.select_risk(risk)?;
        let settings = self.settings.clone().unwrap_or_default();
        let out = solve_product(&product, &risk, &settings)?;
        Ok(SolveResponse {
            mesh: product.mesh.edges().to_vec(),
            growth_optimal: out.growth_optimal.into_values(),
            payoff: out.payoff.into_values(),
            implied_risk_aversion: MarkedSeries::from_implied(&out.implied),
            cost_residual: out.manifest.cost_residual,
            manifest: out.manifest,
            validation: out.report,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplyRequest {
    pub product: ProductSpecFile,
    pub payoff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplyResponse {
    /// Interior mesh edges the values belong to.
    pub x_mid: Vec<f64>,
    pub implied_risk_aversion: MarkedSeries,
}

impl ImplyRequest {
    pub fn run(&self) -> FormatResult<ImplyResponse> {
        let product = Product::from_spec(&self.product, None)?;
        let implied = imply_product(&product, &self.payoff)?;
        Ok(ImplyResponse {
            x_mid: product.mesh.interior_edges().to_vec(),
            implied_risk_aversion: MarkedSeries::from_implied(&implied),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    pub tol: f64,
    pub flat_tol: f64,
    pub require_state_agnostic: bool,
}

impl Default for AuditSettings {
    fn default() -> Self {
        let d = AuditOptions::default();
        Self {
            tol: d.tol,
            flat_tol: d.flat_tol,
            require_state_agnostic: d.require_state_agnostic,
        }
    }
}

impl From<AuditSettings> for AuditOptions {
    fn from(s: AuditSettings) -> Self {
        AuditOptions {
            tol: s.tol,
            flat_tol: s.flat_tol,
            require_state_agnostic: s.require_state_agnostic,
            ..AuditOptions::default()
        }
    }
}

/// Body of a validation request; the payoff or overlay may also come from
/// the product itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRequest {
    pub product: ProductSpecFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<AuditSettings>,
}

impl ValidateRequest {
    pub fn run(&self) -> FormatResult<ValidationReport> {
        let product = Product::from_spec(&self.product, None)?;
        let payoff = self.payoff.as_ref().or(product.payoff.as_ref());
        let overlay = self.overlay.as_ref().or(product.overlay.as_ref());
        let subject = match (payoff, overlay) {
            (Some(p), None) => AuditSubject::Payoff(p),
            (None, Some(h)) => AuditSubject::Overlay(h),
            _ => {
                return Err(FormatError::Invalid(
                    "give exactly one of \"payoff\" or \"overlay\"".to_string(),
                ))
            }
        };
        let options = self.options.unwrap_or_default().into();
        Ok(validate_product(&product, subject, &options)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{parse_json, to_json};
    use crate::validation::Classification;

    fn two_bucket() -> ProductSpecFile {
        ProductSpecFile {
            name: Some("two".into()),
            notes: None,
            mesh: vec![0.0, 1.0, 2.0],
            prices: None,
            market: Some(vec![0.25, 0.75]),
            belief: vec![0.5, 0.5],
            risk_profile: None,
            payoff: None,
            overlay: None,
        }
    }

    fn solve(risk: RiskProfileSpec) -> FormatResult<SolveResponse> {
        SolveRequest {
            product: two_bucket(),
            risk: Some(risk),
            settings: None,
        }
        .run()
    }

    #[test]
    fn log_family_returns_growth_optimal() {
        let out = solve(RiskProfileSpec::Family(UtilityFamily::Log)).unwrap();
        assert_eq!(out.payoff, out.growth_optimal);
        assert_eq!(out.payoff, vec![2.0, 2.0 / 3.0]);
        assert!(out.validation.acceptable);
    }

    #[test]
    fn affine_family_on_two_buckets() {
        let out = solve(RiskProfileSpec::OneParam(OneParam { a: 2.0 })).unwrap();
        assert!((out.payoff[0] - 1.5).abs() < 1e-15);
        assert!((out.payoff[1] - 5.0 / 6.0).abs() < 1e-15);
        assert!(out.cost_residual.abs() <= 1e-10);
    }

    #[test]
    fn max_loss_records_calibrated_a() {
        let mut product = two_bucket();
        product.market = Some(vec![0.5, 0.5]);
        product.belief = vec![0.8, 0.2];
        let out = SolveRequest {
            product,
            risk: Some(RiskProfileSpec::MaxLoss(MaxLoss { max_loss: 0.7 })),
            settings: None,
        }
        .run()
        .unwrap();
        let a = out.manifest.calibrated_a.unwrap();
        assert_eq!(a, 2.0);
        assert!((out.payoff[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn risk_loving_profile_is_rejected() {
        let err = solve(RiskProfileSpec::Inline(InlineProfile {
            values: vec![Extended(-1.0)],
            allow_gambling: false,
        }))
        .unwrap_err();
        assert!(err.to_string().contains("risk-loving input"), "{err}");
        let ok = solve(RiskProfileSpec::Inline(InlineProfile {
            values: vec![Extended(-1.0)],
            allow_gambling: true,
        }))
        .unwrap();
        assert_eq!(
            ok.validation.classification,
            Classification::RiskLovingSegments
        );
    }

    #[test]
    fn exactly_one_risk_specification() {
        let mut product = two_bucket();
        product.risk_profile = Some(RiskProfileSpec::Family(UtilityFamily::Log));
        let both = SolveRequest {
            product: product.clone(),
            risk: Some(RiskProfileSpec::Family(UtilityFamily::Log)),
            settings: None,
        };
        assert!(both.run().is_err());
        let inline = SolveRequest {
            product,
            risk: None,
            settings: None,
        };
        assert!(inline.run().is_ok());
        let none = SolveRequest {
            product: two_bucket(),
            risk: None,
            settings: None,
        };
        assert!(none.run().is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let out = solve(RiskProfileSpec::Inline(InlineProfile {
            values: vec![Extended(f64::INFINITY)],
            allow_gambling: false,
        }))
        .unwrap();
        assert_eq!(out.payoff, vec![1.0, 1.0]);
        let text = to_json(&out.manifest);
        let back: RunManifest = parse_json(&text, "manifest.json").unwrap();
        assert_eq!(back, out.manifest);
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn prices_or_market_but_not_both() {
        let mut product = two_bucket();
        product.prices = Some(vec![0.1, 0.3]);
        assert!(Product::from_spec(&product, None).is_err());
        product.market = None;
        let p = Product::from_spec(&product, None).unwrap();
        assert!(crate::numeric::max_abs_diff(p.market.weights(), &[0.25, 0.75]) < 1e-15);
        product.prices = Some(vec![0.1, 0.3, 0.6]);
        assert!(Product::from_spec(&product, None).is_err());
    }

    #[test]
    fn file_reference_needs_base_dir() {
        let mut product = two_bucket();
        product.risk_profile = Some(RiskProfileSpec::File(crate::formats::ProfileFile {
            file: "r.csv".into(),
            allow_gambling: false,
        }));
        assert!(matches!(
            Product::from_spec(&product, None).unwrap_err(),
            FormatError::Invalid(_)
        ));
    }

    #[test]
    fn validate_request_bond() {
        let report = ValidateRequest {
            product: two_bucket(),
            payoff: Some(vec![1.0, 1.0]),
            overlay: None,
            options: None,
        }
        .run()
        .unwrap();
        assert!(report.acceptable);
        assert!(report.notes.iter().any(|n| n.starts_with("bond")));
    }

    #[test]
    fn imply_request() {
        let out = ImplyRequest {
            product: two_bucket(),
            payoff: vec![2.0, 2.0 / 3.0],
        }
        .run()
        .unwrap();
        assert_eq!(out.x_mid, vec![1.0]);
        assert_eq!(out.implied_risk_aversion.values, vec![Some(1.0)]);
        assert!(ImplyRequest {
            product: two_bucket(),
            payoff: vec![1.0, 1.0, 1.0],
        }
        .run()
        .is_err());
    }
}
