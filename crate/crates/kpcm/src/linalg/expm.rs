//! Matrix exponential by scaling-and-squaring with a truncated Taylor series.

use super::ComplexMatrix;
use crate::{Error, Result};

const MAX_TERMS: usize = 96;

/// `exp(A)` to relative tolerance `tol` (valid well past ‖A‖ = 100).
///
/// The argument is scaled by 2^{-s} until its norm is ≤ 0.5, the series is
/// summed until the term norm falls below `tol` times the partial sum, and
/// the result is squared `s` times.
pub fn mat_exp(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !(tol > 0.0) {
        return Err(Error::invalid("mat_exp: tolerance must be positive"));
    }
    if !a.is_finite() {
        return Err(Error::invalid("mat_exp: non-finite entries"));
    }
    let norm = a.inf_norm();
    let mut squarings = 0u32;
    while norm / f64::powi(2.0, squarings as i32) > 0.5 {
        squarings += 1;
    }
    let b = a.scaled(crate::cx(f64::powi(2.0, -(squarings as i32)), 0.0));

    let mut sum = ComplexMatrix::identity(a.n());
    let mut term = ComplexMatrix::identity(a.n());
    let mut converged = false;
    for k in 1..=MAX_TERMS {
        term = term.mul(&b).scaled(crate::cx(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        let t = term.max_abs();
        if t == 0.0 || t <= 0.25 * tol * sum.max_abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure { terms: MAX_TERMS });
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    Ok(sum)
}
