use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use payoff_forge_core::formats::{
    parse_family_flag, parse_json, read_curve_csv, read_file, read_risk_csv, to_json,
    write_curve_csv, write_file, write_plot_csv, write_risk_csv, Curve, FormatError, PlotSeries,
    RISK_HEADER,
};
use payoff_forge_core::numeric::max_abs_diff;
use payoff_forge_core::pipeline::{
    solve_product, validate_product, AuditSubject, Product, RiskChoice,
};
use payoff_forge_core::solver::{
    brute_force_oracle, shoot_state_agnostic, solve_fixed_point, SolveSettings,
};
use payoff_forge_core::{
    allocation_to_payoff, implied_risk_aversion, imply_market_distribution, AuditOptions,
    Distribution, ProductSpecFile, Role, SecurityQuotes, UtilityFamily, UtilitySpec,
};

pub enum CliError {
    Usage(String),
    Format(FormatError),
    /// The audit ran but did not accept the product.
    Rejected(String),
    Service(String),
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Format(e)
    }
}

impl From<payoff_forge_core::ForgeError> for CliError {
    fn from(e: payoff_forge_core::ForgeError) -> Self {
        CliError::Format(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Format(e) if e.is_solver_failure() => 2,
            CliError::Format(_) | CliError::Rejected(_) => 3,
            CliError::Service(_) => 1,
        }
    }

    pub fn message(&self) -> Option<String> {
        match self {
            CliError::Usage(m) | CliError::Rejected(m) | CliError::Service(m) => Some(m.clone()),
            CliError::Format(e) => Some(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

pub struct RiskFlags {
    pub family: Option<String>,
    pub profile: Option<PathBuf>,
    pub a: Option<f64>,
    pub max_loss: Option<f64>,
    pub allow_gambling: bool,
}

fn load_product(path: &Path, floor_beliefs: bool) -> Result<Product, CliError> {
    let (mut spec, base) = ProductSpecFile::load(path)?;
    if floor_beliefs {
        spec.belief = Distribution::floored(&spec.belief, Role::Belief)?.into_weights();
    }
    Ok(Product::from_spec(&spec, Some(&base))?)
}

fn read_curve(path: &Path) -> Result<Curve, CliError> {
    Ok(read_curve_csv(
        &read_file(path)?,
        &path.display().to_string(),
    )?)
}

fn load_settings(path: Option<&Path>) -> Result<SolveSettings, CliError> {
    match path {
        Some(p) => Ok(parse_json(&read_file(p)?, &p.display().to_string())?),
        None => Ok(SolveSettings::default()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => Ok(write_file(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn curve_on_product(product: &Product, path: &Path) -> Result<Vec<f64>, CliError> {
    let curve = read_curve(path)?;
    product.check_mesh(&curve.mesh)?;
    Ok(curve.values)
}

pub fn imply_market(prices: &Path, out: Option<&Path>) -> CliResult {
    let curve = read_curve(prices)?;
    let quotes = SecurityQuotes::new(curve.values)?;
    let market = imply_market_distribution(&quotes)?;
    emit(out, &write_curve_csv(&curve.mesh, market.weights())?)
}

impl RiskFlags {
    fn choice(&self, product: &Product) -> Result<Option<RiskChoice>, CliError> {
        Ok(if let Some(name) = &self.family {
            Some(RiskChoice::Family(parse_family_flag(name)?))
        } else if let Some(path) = &self.profile {
            let table = read_risk_csv(&read_file(path)?, &path.display().to_string())?;
            Some(RiskChoice::ProfileOfX {
                values: table.profile_for(&product.mesh)?,
                allow_gambling: false,
            })
        } else if let Some(a) = self.a {
            Some(RiskChoice::OneParam { a })
        } else {
            self.max_loss.map(|floor| RiskChoice::MaxLoss { floor })
        })
    }
}

pub fn solve(
    product_path: &Path,
    floor_beliefs: bool,
    flags: RiskFlags,
    settings: Option<&Path>,
    out_dir: &Path,
) -> CliResult {
    let product = load_product(product_path, floor_beliefs)?;
    let mut risk = product.select_risk(flags.choice(&product)?)?;
    if flags.allow_gambling {
        match &mut risk {
            RiskChoice::ProfileOfX { allow_gambling, .. } => *allow_gambling = true,
            _ => {
                return Err(CliError::Usage(
                    "--allow-gambling applies only to risk-aversion profiles".to_string(),
                ))
            }
        }
    }
    let settings = load_settings(settings)?;
    let mut outcome = solve_product(&product, &risk, &settings)?;

    std::fs::create_dir_all(out_dir).map_err(|e| FormatError::File {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let files = [
        (
            "growth_optimal",
            "growth_optimal.csv",
            write_curve_csv(&product.mesh, outcome.growth_optimal.values())?,
        ),
        (
            "payoff",
            "payoff.csv",
            write_curve_csv(&product.mesh, outcome.payoff.values())?,
        ),
        (
            "implied_risk_aversion",
            "implied_r.csv",
            write_risk_csv(&product.mesh, &outcome.implied)?,
        ),
    ];
    let mut outputs = BTreeMap::new();
    for (key, name, text) in &files {
        write_file(&out_dir.join(name), text)?;
        outputs.insert(key.to_string(), name.to_string());
    }
    outputs.insert("manifest".to_string(), "manifest.json".to_string());
    outcome.manifest.outputs = outputs;
    write_file(&out_dir.join("manifest.json"), &to_json(&outcome.manifest))?;

    println!("solver: {}", outcome.manifest.solver);
    if let Some(a) = outcome.manifest.calibrated_a {
        println!("calibrated a: {a}");
    }
    println!("cost residual: {:e}", outcome.manifest.cost_residual);
    println!(
        "classification: {}",
        serde_json::to_value(outcome.report.classification)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    );
    println!("wrote {}", out_dir.display());
    Ok(())
}

pub fn imply_r(
    product_path: &Path,
    floor_beliefs: bool,
    payoff: &Path,
    out: Option<&Path>,
) -> CliResult {
    let product = load_product(product_path, floor_beliefs)?;
    let values = curve_on_product(&product, payoff)?;
    let implied = implied_risk_aversion(&product.curve(&values)?, &product.growth_optimal()?)?;
    emit(out, &write_risk_csv(&product.mesh, &implied)?)
}

pub fn validate(
    product_path: &Path,
    floor_beliefs: bool,
    curve: Option<&Path>,
    overlay: bool,
    require_state_agnostic: bool,
    out: Option<&Path>,
) -> CliResult {
    let product = load_product(product_path, floor_beliefs)?;
    let from_file = curve.map(|p| curve_on_product(&product, p)).transpose()?;
    let subject =
        match (&from_file, overlay) {
            (Some(values), false) => AuditSubject::Payoff(values),
            (Some(values), true) => AuditSubject::Overlay(values),
            (None, true) => AuditSubject::Overlay(product.overlay.as_deref().ok_or_else(|| {
                CliError::Usage("no overlay file given and the product has none".to_string())
            })?),
            (None, false) => match (&product.payoff, &product.overlay) {
                (Some(p), None) => AuditSubject::Payoff(p),
                (None, Some(h)) => AuditSubject::Overlay(h),
                (Some(_), Some(_)) => return Err(CliError::Usage(
                    "the product has both a payoff and an overlay; pass --overlay or a curve file"
                        .to_string(),
                )),
                (None, None) => {
                    return Err(CliError::Usage(
                        "no curve file given and the product has no payoff or overlay".to_string(),
                    ))
                }
            },
        };
    let options = AuditOptions {
        require_state_agnostic,
        ..AuditOptions::default()
    };
    let (report, _) = validate_product(&product, subject, &options)?;
    print!("{}", report.render_text());
    if let Some(path) = out {
        write_file(path, &to_json(&report))?;
    }
    if report.acceptable {
        Ok(())
    } else {
        Err(CliError::Rejected("product not acceptable".to_string()))
    }
}

pub fn oracle(
    product_path: &Path,
    floor_beliefs: bool,
    family: Option<&str>,
    settings: Option<&Path>,
) -> CliResult {
    let product = load_product(product_path, floor_beliefs)?;
    let family: UtilityFamily = match (family, &product.risk) {
        (Some(name), _) => parse_family_flag(name)?,
        (None, Some(RiskChoice::Family(f))) => *f,
        _ => {
            return Err(CliError::Usage(
                "the oracle needs a utility family: pass --family".to_string(),
            ))
        }
    };
    let settings = load_settings(settings)?;
    let spec = UtilitySpec::from(family);
    let quotes = SecurityQuotes::from_distribution(&product.market);
    let f = product.growth_optimal()?;

    let by_oracle = brute_force_oracle(&product.belief, &quotes, &spec, &settings)?;
    let by_fixed_point = solve_fixed_point(&product.belief, &quotes, &spec, &settings)?;
    let oracle_payoff = allocation_to_payoff(&by_oracle, &quotes)?;
    let fixed_point_payoff = allocation_to_payoff(&by_fixed_point, &quotes)?;
    let shooting = shoot_state_agnostic(&f, (&spec).into(), &product.market, &settings)?.payoff;

    let lines = [
        (
            "oracle vs fixed point (allocation)",
            max_abs_diff(by_oracle.weights(), by_fixed_point.weights()),
        ),
        (
            "fixed point vs elasticity (payoff)",
            max_abs_diff(fixed_point_payoff.values(), shooting.values()),
        ),
        (
            "oracle vs elasticity (payoff)",
            max_abs_diff(oracle_payoff.values(), shooting.values()),
        ),
    ];
    for (label, diff) in lines {
        println!("{label}: max |diff| = {diff:.3e}");
    }
    Ok(())
}

pub fn plot_data(series: &[String], out: Option<&Path>) -> CliResult {
    let mut parsed = Vec::with_capacity(series.len());
    for item in series {
        let (name, file) = item
            .split_once('=')
            .filter(|(n, f)| !n.is_empty() && !f.is_empty() && !n.contains(','))
            .ok_or_else(|| CliError::Usage(format!("series must be NAME=FILE, got {item:?}")))?;
        let path = Path::new(file);
        let text = read_file(path)?;
        let source = path.display().to_string();
        let header = text.lines().next().unwrap_or_default().trim();
        parsed.push(if header == RISK_HEADER.join(",") {
            PlotSeries::Risk {
                name: name.to_string(),
                table: read_risk_csv(&text, &source)?,
            }
        } else {
            PlotSeries::Curve {
                name: name.to_string(),
                curve: read_curve_csv(&text, &source)?,
            }
        });
    }
    emit(out, &write_plot_csv(&parsed)?)
}

pub fn serve(bind: Option<&str>) -> CliResult {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
    let bind = payoff_forge_service::resolve_bind(bind);
    runtime
        .block_on(payoff_forge_service::serve(&bind))
        .map_err(|e| CliError::Service(e.to_string()))
}
