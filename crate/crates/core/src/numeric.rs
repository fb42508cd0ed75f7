//! Small numerical helpers shared across the engine.

use std::cell::Cell;

/// Compensated (Neumaier) sum.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut total = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            comp += (total - t) + v;
        } else {
            comp += (v - t) + total;
        }
        total = t;
    }
    total + comp
}

/// Compensated dot product of two equally long slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Refinement stops at round-off level or after a fixed evaluation budget,
/// so integrable end-point singularities terminate with the best estimate.
/// Returns `None` if the integrand produced a non-finite value.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Option<f64> {
    if a == b {
        return Some(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let budget = Cell::new(SIMPSON_EVALUATIONS);
    let v = simpson_step(f, a, b, fa, fm, fb, whole, tol, 50, &budget)?;
    v.is_finite().then_some(v)
}

const SIMPSON_EVALUATIONS: usize = 1 << 20;

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &Cell<usize>,
) -> Option<f64> {
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return None;
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    budget.set(budget.get().saturating_sub(2));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let roundoff = 4.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || budget.get() == 0 || delta.abs() <= (15.0 * tol).max(roundoff) {
        return Some(left + right + delta / 15.0);
    }
    Some(
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?,
    )
}
