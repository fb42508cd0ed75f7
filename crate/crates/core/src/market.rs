//! Discrete securities market: the mesh, binary-spread quotes and the
//! probability-like distributions that live on its buckets.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, ForgeError, Result};
use crate::numeric;

/// Smallest admissible distribution weight.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Allowed deviation of a distribution's total mass from 1.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Strictly increasing partition `x_0 < x_1 < ... < x_N` of the underlying's range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Mesh {
    edges: Vec<f64>,
}

impl Mesh {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 {
            return Err(ForgeError::TooFewBuckets(edges.len().saturating_sub(1)));
        }
        for (i, e) in edges.iter().enumerate() {
            if !e.is_finite() {
                return Err(ForgeError::InvalidValue {
                    what: "mesh edge",
                    index: i,
                    value: *e,
                });
            }
        }
        if let Some(i) = edges.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ForgeError::UnorderedMesh { index: i + 1 });
        }
        Ok(Self { edges })
    }

    /// Evenly spaced mesh with `buckets` buckets on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, buckets: usize) -> Result<Self> {
        let step = (hi - lo) / buckets as f64;
        Self::new((0..=buckets).map(|i| lo + step * i as f64).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn buckets(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Interior edges `x_1 .. x_{N-1}`; the edge between buckets `k` and `k+1`
    /// is `x_{k+1}`.
    pub fn interior_edges(&self) -> &[f64] {
        &self.edges[1..self.edges.len() - 1]
    }

    pub fn bucket(&self, k: usize) -> (f64, f64) {
        (self.edges[k], self.edges[k + 1])
    }
}

impl TryFrom<Vec<f64>> for Mesh {
    type Error = ForgeError;

    fn try_from(edges: Vec<f64>) -> Result<Self> {
        Mesh::new(edges)
    }
}

impl From<Mesh> for Vec<f64> {
    fn from(mesh: Mesh) -> Self {
        mesh.edges
    }
}

/// Prices `p_k` of the binary spreads paying 1 in bucket `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityQuotes {
    prices: Vec<f64>,
}

impl SecurityQuotes {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.len() < 2 {
            return Err(ForgeError::TooFewBuckets(prices.len()));
        }
        for (i, &p) in prices.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(ForgeError::InvalidValue {
                    what: "price",
                    index: i,
                    value: p,
                });
            }
        }
        Ok(Self { prices })
    }

    /// Quotes equal to a normalized distribution, so that `m = p`.
    pub fn from_distribution(m: &Distribution) -> Self {
        Self {
            prices: m.weights().to_vec(),
        }
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Market,
    Belief,
    Allocation,
}

/// Strictly positive weights on the buckets, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
    role: Role,
}

impl Distribution {
    /// Wraps already normalized weights, enforcing the positivity floor and
    /// unit mass.
    pub fn new(weights: Vec<f64>, role: Role) -> Result<Self> {
        let outcome = validate_distribution(&weights, SUM_TOLERANCE);
        if !outcome.passed {
            return Err(ForgeError::InvalidDistribution(outcome.describe()));
        }
        Ok(Self { weights, role })
    }

    /// Normalizes raw non-negative weights to unit mass.
    pub fn normalized(raw: &[f64], role: Role) -> Result<Self> {
        Self::new(normalize(raw)?, role)
    }

    /// Like [`Distribution::normalized`], but lifts weights below the floor
    /// up to it before renormalizing. Opt-in only.
    pub fn floored(raw: &[f64], role: Role) -> Result<Self> {
        let total = numeric::sum(raw.iter().copied());
        let lifted: Vec<f64> = raw
            .iter()
            .map(|&w| {
                if w.is_finite() {
                    w.max(WEIGHT_FLOOR * total)
                } else {
                    w
                }
            })
            .collect();
        let mut d = normalize(&lifted)?;
        for w in &mut d {
            *w = w.max(WEIGHT_FLOOR);
        }
        Self::new(normalize(&d)?, role)
    }

    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, role: Role) -> Self {
        Self { weights, role }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(ForgeError::TooFewBuckets(raw.len()));
    }
    for (i, &w) in raw.iter().enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(ForgeError::InvalidValue {
                what: "weight",
                index: i,
                value: w,
            });
        }
    }
    let total = numeric::sum(raw.iter().copied());
    if total <= 0.0 {
        return Err(ForgeError::InvalidDistribution("total mass is zero".into()));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Market-implied distribution `m_k = p_k / sum_i p_i`.
pub fn imply_market_distribution(quotes: &SecurityQuotes) -> Result<Distribution> {
    let total = numeric::sum(quotes.prices.iter().copied());
    let weights = quotes.prices.iter().map(|p| p / total).collect();
    Distribution::new(weights, Role::Market)
}

/// Quoted returns `r_k = 1 / p_k`.
pub fn quoted_returns(quotes: &SecurityQuotes) -> Vec<f64> {
    quotes.prices.iter().map(|p| 1.0 / p).collect()
}

/// Report produced by [`validate_distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub passed: bool,
    pub sum: f64,
    pub sum_deviation: f64,
    pub min_weight: f64,
    /// Buckets that are non-finite or below [`WEIGHT_FLOOR`].
    pub offending: Vec<usize>,
}

impl ValidationOutcome {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.offending.is_empty() {
            parts.push(format!(
                "weight below floor {WEIGHT_FLOOR:e} at buckets {:?}",
                self.offending
            ));
        }
        if !self.passed {
            parts.push(format!("sum = {}", self.sum));
        }
        if parts.is_empty() {
            "ok".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Checks positivity floor and unit mass within `tolerance`. Never fails.
pub fn validate_distribution(weights: &[f64], tolerance: f64) -> ValidationOutcome {
    let offending: Vec<usize> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| !(w.is_finite() && **w >= WEIGHT_FLOOR))
        .map(|(i, _)| i)
        .collect();
    let sum = numeric::sum(weights.iter().copied());
    let sum_deviation = (sum - 1.0).abs();
    let min_weight = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = weights.len() >= 2 && offending.is_empty() && sum_deviation <= tolerance;
    ValidationOutcome {
        passed,
        sum,
        sum_deviation,
        min_weight,
        offending,
    }
}

pub(crate) fn same_len(a: usize, b: usize) -> Result<()> {
    check_len("bucket count", a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn market_from_normalized_prices() {
        let q = SecurityQuotes::new(vec![0.2, 0.3, 0.5]).unwrap();
        let m = imply_market_distribution(&q).unwrap();
        assert!(close(m.weights(), &[0.2, 0.3, 0.5], 1e-15));
        assert_eq!(m.role(), Role::Market);
    }

    #[test]
    fn market_rescales_prices() {
        let q = SecurityQuotes::new(vec![0.4, 0.6, 1.0]).unwrap();
        let m = imply_market_distribution(&q).unwrap();
        assert!(close(m.weights(), &[0.2, 0.3, 0.5], 1e-15));
    }

    #[test]
    fn zero_price_names_bucket() {
        let err = SecurityQuotes::new(vec![0.5, 0.0, 0.5]).unwrap_err();
        assert_eq!(
            err,
            ForgeError::InvalidValue {
                what: "price",
                index: 1,
                value: 0.0
            }
        );
    }

    #[test]
    fn returns_are_reciprocals() {
        let q = SecurityQuotes::new(vec![0.5, 0.25]).unwrap();
        assert_eq!(quoted_returns(&q), vec![2.0, 4.0]);
        let q = SecurityQuotes::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(close(&quoted_returns(&q), &[5.0, 10.0 / 3.0, 2.0], 1e-15));
    }

    #[test]
    fn single_bucket_rejected() {
        assert_eq!(
            SecurityQuotes::new(vec![1.0]).unwrap_err(),
            ForgeError::TooFewBuckets(1)
        );
        assert!(Mesh::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn mesh_rejects_unordered_edges() {
        assert_eq!(
            Mesh::new(vec![0.0, 1.0, 1.0]).unwrap_err(),
            ForgeError::UnorderedMesh { index: 2 }
        );
        let mesh = Mesh::new(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(mesh.buckets(), 2);
        assert_eq!(mesh.midpoints(), vec![0.5, 2.0]);
        assert_eq!(mesh.interior_edges(), &[1.0]);
    }

    #[test]
    fn validate_distribution_cases() {
        assert!(validate_distribution(&[0.5, 0.5], 1e-12).passed);

        let short = validate_distribution(&[0.7, 0.2], 1e-12);
        assert!(!short.passed);
        assert!((short.sum - 0.9).abs() < 1e-15);
        assert!(short.offending.is_empty());

        let tiny = 1e-15;
        let rest = 1.0 - tiny;
        let low = validate_distribution(&[rest, tiny], 1e-12);
        assert!(!low.passed);
        assert_eq!(low.offending, vec![1]);
        assert_eq!(low.min_weight, tiny);
    }

    #[test]
    fn floored_is_opt_in() {
        assert!(Distribution::normalized(&[1.0, 0.0, 1.0], Role::Belief).is_err());
        let d = Distribution::floored(&[1.0, 0.0, 1.0], Role::Belief).unwrap();
        assert!(d.weights()[1] >= WEIGHT_FLOOR);
        assert!((numeric::sum(d.weights().iter().copied()) - 1.0).abs() <= 1e-12);
    }
}
