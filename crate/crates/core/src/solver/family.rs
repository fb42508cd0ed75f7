use nalgebra::{DMatrix, DVector};

use crate::error::{ForgeError, Result};
use crate::growth::{growth_optimal_payoff, PayoffCurve, SignedCurve};
use crate::market::{same_len, Distribution};

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ForgeError::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

/// The affine one-parameter family `F = (f - 1) / a + 1`, which scales the
/// growth-optimal payoff around the bond line. Budget is preserved for any
/// `a` because `f` itself costs one unit.
pub fn one_param_payoff(f: &PayoffCurve, a: f64) -> Result<PayoffCurve> {
    positive("a", a)?;
    let values: Vec<f64> = f.values().iter().map(|v| (v - 1.0) / a + 1.0).collect();
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(ForgeError::PositivityViolation {
            min_admissible_a: 1.0 - f.min(),
        });
    }
    PayoffCurve::new(values)
}

/// Family parameter `a` at which the worst outcome of
/// [`one_param_payoff`] equals `floor` (a return multiple in `(0, 1)`).
pub fn calibrate_max_loss(f: &PayoffCurve, floor: f64) -> Result<f64> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(ForgeError::InvalidParameter {
            name: "floor",
            value: floor,
            reason: "must lie strictly between 0 and 1",
        });
    }
    let worst = f.min();
    if worst >= 1.0 {
        return Ok(1.0);
    }
    Ok(decimal_loss_ratio(worst, floor).unwrap_or((1.0 - worst) / (1.0 - floor)))
}

/// Shortest round-trip decimal of `x` as `digits * 10^exponent`.
fn shortest_decimal(x: f64) -> Option<(i128, i32)> {
    let text = format!("{x:e}");
    let (mantissa, exponent) = text.split_once('e')?;
    let exponent: i32 = exponent.parse().ok()?;
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: i128 = format!("{whole}{frac}").parse().ok()?;
    Some((digits, exponent - frac.len() as i32))
}

/// `(1 - x) / (1 - y)` evaluated on the decimal inputs the floats stand
/// for, so that e.g. `0.4` and `0.7` give exactly 2.
fn decimal_loss_ratio(x: f64, y: f64) -> Option<f64> {
    let (dx, ex) = shortest_decimal(x)?;
    let (dy, ey) = shortest_decimal(y)?;
    let e = ex.min(ey).min(0);
    let scale = |d: i128, exp: i32| d.checked_mul(10i128.checked_pow((exp - e) as u32)?);
    let one = 10i128.checked_pow((-e) as u32)?;
    let num = one.checked_sub(scale(dx, ex)?)?;
    let den = one.checked_sub(scale(dy, ey)?)?;
    const EXACT: i128 = 1 << 53;
    (num.abs() <= EXACT && den.abs() <= EXACT && den != 0).then(|| num as f64 / den as f64)
}

/// Zero-cost overlay of the mean-variance investor who measures the mean
/// under the belief and the variance under the market:
/// `h = (b - m) / m / R_a = (f - 1) / R_a`.
pub fn shimko_payoff(
    b: &Distribution,
    m: &Distribution,
    risk_aversion: f64,
) -> Result<SignedCurve> {
    positive("R_a", risk_aversion)?;
    let f = growth_optimal_payoff(b, m)?;
    Ok(SignedCurve {
        values: f
            .values()
            .iter()
            .map(|v| (v - 1.0) / risk_aversion)
            .collect(),
    })
}

/// Direct solution of
/// `max_h sum h b - (R_a / 2) sum h^2 m` subject to `sum h m = 0`
/// through its stationarity conditions
/// `R_a m_k h_k + m_k mu = b_k`, `sum m_k h_k = 0`.
pub fn shimko_oracle(
    b: &Distribution,
    m: &Distribution,
    risk_aversion: f64,
) -> Result<SignedCurve> {
    positive("R_a", risk_aversion)?;
    same_len(m.len(), b.len())?;
    let n = m.len();
    let mut lhs = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (k, (&mk, &bk)) in m.weights().iter().zip(b.weights()).enumerate() {
        lhs[(k, k)] = risk_aversion * mk;
        lhs[(k, n)] = mk;
        lhs[(n, k)] = mk;
        rhs[k] = bk;
    }
    let solution = lhs.lu().solve(&rhs).ok_or(ForgeError::SingularSystem)?;
    Ok(SignedCurve {
        values: solution.iter().take(n).copied().collect(),
    })
}
