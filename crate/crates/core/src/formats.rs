//! File formats shared by the command line, the HTTP service and the Python
//! bindings.
//!
//! Curves are CSV with one row per bucket (`x_left,x_right,value`), risk
//! profiles are CSV with one row per interior edge (`x_mid,R`). Numbers are
//! written with 17 significant digits and `\n` line endings so identical
//! inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::ForgeError;
use crate::market::Mesh;
use crate::preferences::UtilityFamily;
use crate::solver::{ImpliedRiskAversion, ImpliedValue};

pub const CURVE_HEADER: [&str; 3] = ["x_left", "x_right", "value"];
pub const RISK_HEADER: [&str; 2] = ["x_mid", "R"];
pub const PLOT_HEADER: [&str; 4] = ["series", "x_left", "x_right", "value"];

/// Relative tolerance when matching mesh edges read from different files.
pub const MESH_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("{source_name}:{line}: {message}")]
    Syntax {
        source_name: String,
        line: u64,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Domain(#[from] ForgeError),
}

impl FormatError {
    fn syntax(source_name: &str, line: u64, message: impl Into<String>) -> Self {
        FormatError::Syntax {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(self, FormatError::Domain(e) if e.is_solver_failure())
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// `{:.16e}` for finite values, `inf` / `-inf` otherwise.
pub fn format_number(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Parses a decimal number or `inf` / `-inf`. NaN is rejected.
pub fn parse_number(text: &str) -> Option<f64> {
    match text.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

fn format_implied(value: ImpliedValue) -> String {
    match value {
        ImpliedValue::Value(v) => format_number(v),
        ImpliedValue::Indeterminate => "indeterminate".to_string(),
    }
}

pub fn read_file(path: &Path) -> FormatResult<String> {
    std::fs::read_to_string(path).map_err(|e| FormatError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_file(path: &Path, contents: &str) -> FormatResult<()> {
    std::fs::write(path, contents).map_err(|e| FormatError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn csv_rows(
    text: &str,
    source_name: &str,
    header: &[&str],
) -> FormatResult<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| FormatError::syntax(source_name, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(FormatError::syntax(
            source_name,
            1,
            format!(
                "expected header {}, found {}",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            FormatError::syntax(source_name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

fn number_at(source_name: &str, line: u64, column: &str, text: &str) -> FormatResult<f64> {
    parse_number(text).ok_or_else(|| {
        FormatError::syntax(
            source_name,
            line,
            format!("{column}: not a number: {text:?}"),
        )
    })
}

/// A curve on a mesh, one value per bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

pub fn write_curve_csv(mesh: &Mesh, values: &[f64]) -> FormatResult<String> {
    if values.len() != mesh.buckets() {
        return Err(ForgeError::LengthMismatch {
            what: "curve",
            expected: mesh.buckets(),
            found: values.len(),
        }
        .into());
    }
    let mut out = CURVE_HEADER.join(",");
    out.push('\n');
    for (k, v) in values.iter().enumerate() {
        let (lo, hi) = mesh.bucket(k);
        out.push_str(&format!(
            "{},{},{}\n",
            format_number(lo),
            format_number(hi),
            format_number(*v)
        ));
    }
    Ok(out)
}

pub fn read_curve_csv(text: &str, source_name: &str) -> FormatResult<Curve> {
    let rows = csv_rows(text, source_name, &CURVE_HEADER)?;
    if rows.is_empty() {
        return Err(FormatError::syntax(source_name, 2, "no data rows"));
    }
    let mut edges = Vec::with_capacity(rows.len() + 1);
    let mut values = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        let left = number_at(source_name, *line, "x_left", &row[0])?;
        let right = number_at(source_name, *line, "x_right", &row[1])?;
        let value = number_at(source_name, *line, "value", &row[2])?;
        match edges.last() {
            None => edges.push(left),
            Some(prev) if *prev == left => {}
            Some(prev) => {
                return Err(FormatError::syntax(
                    source_name,
                    *line,
                    format!("bucket starts at {left} but the previous one ended at {prev}"),
                ))
            }
        }
        if !(right > left) {
            return Err(FormatError::syntax(
                source_name,
                *line,
                format!("bucket [{left}, {right}] is empty or reversed"),
            ));
        }
        edges.push(right);
        values.push(value);
    }
    let mesh = Mesh::new(edges).map_err(|e| FormatError::syntax(source_name, 2, e.to_string()))?;
    Ok(Curve { mesh, values })
}

pub fn write_risk_csv(mesh: &Mesh, implied: &ImpliedRiskAversion) -> FormatResult<String> {
    if implied.len() + 1 != mesh.buckets() {
        return Err(ForgeError::LengthMismatch {
            what: "risk profile",
            expected: mesh.buckets() - 1,
            found: implied.len(),
        }
        .into());
    }
    let mut out = RISK_HEADER.join(",");
    out.push('\n');
    for (x, v) in implied.at_mesh(mesh) {
        out.push_str(&format!("{},{}\n", format_number(x), format_implied(v)));
    }
    Ok(out)
}

/// Rows of an `x_mid,R` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    pub x_mid: Vec<f64>,
    pub values: ImpliedRiskAversion,
}

impl RiskTable {
    /// The profile as solver input, checked against the interior edges of
    /// `mesh`. Indeterminate rows are not allowed here.
    pub fn profile_for(&self, mesh: &Mesh) -> FormatResult<Vec<f64>> {
        if !edges_match(&self.x_mid, mesh.interior_edges()) {
            return Err(FormatError::Invalid(
                "risk profile rows do not match the interior mesh edges".to_string(),
            ));
        }
        self.values
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.value().ok_or_else(|| {
                    FormatError::Invalid(format!("risk profile edge {i} is indeterminate"))
                })
            })
            .collect()
    }
}

pub fn read_risk_csv(text: &str, source_name: &str) -> FormatResult<RiskTable> {
    let rows = csv_rows(text, source_name, &RISK_HEADER)?;
    let mut x_mid = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        x_mid.push(number_at(source_name, *line, "x_mid", &row[0])?);
        values.push(if row[1] == "indeterminate" {
            ImpliedValue::Indeterminate
        } else {
            ImpliedValue::Value(number_at(source_name, *line, "R", &row[1])?)
        });
    }
    Ok(RiskTable {
        x_mid,
        values: ImpliedRiskAversion { values },
    })
}

pub fn edges_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= MESH_MATCH_TOLERANCE * x.abs().max(y.abs()).max(1.0))
}

/// Series for [`write_plot_csv`]: bucket curves or edge profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotSeries {
    Curve { name: String, curve: Curve },
    Risk { name: String, table: RiskTable },
}

/// Long-format CSV with one row per point: `series,x_left,x_right,value`.
/// Edge profiles put the edge in both position columns.
pub fn write_plot_csv(series: &[PlotSeries]) -> FormatResult<String> {
    if series.is_empty() {
        return Err(FormatError::Invalid("no series to plot".to_string()));
    }
    let mut out = PLOT_HEADER.join(",");
    out.push('\n');
    for s in series {
        match s {
            PlotSeries::Curve { name, curve } => {
                for (k, v) in curve.values.iter().enumerate() {
                    let (lo, hi) = curve.mesh.bucket(k);
                    out.push_str(&format!(
                        "{name},{},{},{}\n",
                        format_number(lo),
                        format_number(hi),
                        format_number(*v)
                    ));
                }
            }
            PlotSeries::Risk { name, table } => {
                for (x, v) in table.x_mid.iter().zip(&table.values.values) {
                    let x = format_number(*x);
                    out.push_str(&format!("{name},{x},{x},{}\n", format_implied(*v)));
                }
            }
        }
    }
    Ok(out)
}

/// A number that may also be written as `"inf"` or `"-inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extended(pub f64);

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0)
        } else {
            serializer.serialize_str(&format_number(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtendedVisitor;
        impl Visitor<'_> for ExtendedVisitor {
            type Value = Extended;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Extended, E> {
                Ok(Extended(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Extended, E> {
                Ok(Extended(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Extended, E> {
                Ok(Extended(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Extended, E> {
                match v {
                    "inf" => Ok(Extended(f64::INFINITY)),
                    "-inf" => Ok(Extended(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        deserializer.deserialize_any(ExtendedVisitor)
    }
}

/// Wire form of a series that may hold non-finite entries: the numeric
/// array stays finite (`null` where a marker applies) and the markers map
/// index to `"inf"`, `"-inf"` or `"indeterminate"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkedSeries {
    pub values: Vec<Option<f64>>,
    #[serde(default)]
    pub markers: BTreeMap<usize, String>,
}

impl MarkedSeries {
    pub fn from_values(values: &[f64]) -> Self {
        let mut markers = BTreeMap::new();
        let values = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if v.is_finite() {
                    Some(*v)
                } else {
                    markers.insert(i, format_number(*v));
                    None
                }
            })
            .collect();
        Self { values, markers }
    }

    pub fn from_implied(implied: &ImpliedRiskAversion) -> Self {
        let mut markers = BTreeMap::new();
        let values = implied
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                ImpliedValue::Value(r) if r.is_finite() => Some(*r),
                other => {
                    markers.insert(i, format_implied(*other));
                    None
                }
            })
            .collect();
        Self { values, markers }
    }

    pub fn to_implied(&self) -> FormatResult<ImpliedRiskAversion> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(
                |(i, v)| match (v, self.markers.get(&i).map(String::as_str)) {
                    (Some(x), None) => Ok(ImpliedValue::Value(*x)),
                    (None, Some("indeterminate")) => Ok(ImpliedValue::Indeterminate),
                    (None, Some(m)) => parse_number(m).map(ImpliedValue::Value).ok_or_else(|| {
                        FormatError::Invalid(format!("unknown marker {m:?} at {i}"))
                    }),
                    _ => Err(FormatError::Invalid(format!(
                        "entry {i} needs exactly one of a value or a marker"
                    ))),
                },
            )
            .collect::<FormatResult<Vec<_>>>()?;
        Ok(ImpliedRiskAversion { values })
    }

    pub fn to_values(&self) -> FormatResult<Vec<f64>> {
        self.to_implied()?
            .values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.value()
                    .ok_or_else(|| FormatError::Invalid(format!("entry {i} is indeterminate")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProfile {
    pub values: Vec<Extended>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_gambling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    /// `x_mid,R` file, relative to the product file.
    pub file: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_gambling: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneParam {
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxLoss {
    /// Worst acceptable return multiple, in `(0, 1)`.
    pub max_loss: f64,
}

/// Risk specification as written in product files and requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RiskProfileSpec {
    Family(UtilityFamily),
    Inline(InlineProfile),
    File(ProfileFile),
    OneParam(OneParam),
    MaxLoss(MaxLoss),
}

/// Parses `NAME[:PARAM]` as used by `--family`.
pub fn parse_family_flag(text: &str) -> FormatResult<UtilityFamily> {
    let (name, param) = match text.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (text.trim(), None),
    };
    let number = |what: &str| -> FormatResult<f64> {
        let p = param.ok_or_else(|| {
            FormatError::Invalid(format!("family {name} needs a parameter: {name}:{what}"))
        })?;
        parse_number(p)
            .filter(|v| v.is_finite())
            .ok_or_else(|| FormatError::Invalid(format!("family {name}: bad parameter {p:?}")))
    };
    let family = match name {
        "log" | "kelly" => {
            if param.is_some() {
                return Err(FormatError::Invalid(
                    "family log takes no parameter".to_string(),
                ));
            }
            UtilityFamily::Log
        }
        "constant_relative" | "crra" | "power" => {
            UtilityFamily::ConstantRelative { r: number("R")? }
        }
        "constant_absolute_over_f" | "one_param_utility" => {
            UtilityFamily::ConstantAbsoluteOverF { a: number("a")? }
        }
        other => {
            return Err(FormatError::Invalid(format!(
                "unknown family {other:?} (log, constant_relative:R, constant_absolute_over_f:a)"
            )))
        }
    };
    Ok(family)
}

/// Product description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub mesh: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<Vec<f64>>,
    pub belief: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_profile: Option<RiskProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<Vec<f64>>,
}

fn json_error(source_name: &str, e: &serde_json::Error) -> FormatError {
    FormatError::syntax(source_name, e.line() as u64, e.to_string())
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, source_name: &str) -> FormatResult<T> {
    serde_json::from_str(text).map_err(|e| json_error(source_name, &e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

impl ProductSpecFile {
    pub fn parse(text: &str, source_name: &str) -> FormatResult<Self> {
        parse_json(text, source_name)
    }

    pub fn load(path: &Path) -> FormatResult<(Self, PathBuf)> {
        let text = read_file(path)?;
        let spec = Self::parse(&text, &path.display().to_string())?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((spec, base))
    }
}
