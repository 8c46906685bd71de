//! Characteristic polynomial via the Faddeev-LeVerrier recursion.

use super::{ComplexMatrix, Polynomial};
use crate::{cx, Error, Result};

/// Coefficients of `det(wI − A)` in `w`, degree-ascending, monic.
///
/// The recursion is dependency-free and exact in exact arithmetic; its
/// numerical range is ample for the desk-scale sizes here, guarded at 64.
pub fn char_poly(a: &ComplexMatrix) -> Result<Polynomial> {
    let n = a.n();
    if n > 64 {
        return Err(Error::invalid("char_poly: dimension above the n <= 64 guard"));
    }
    // c[k] multiplies w^k; c[n] = 1.
    let mut c = vec![crate::Complex64::ZERO; n + 1];
    c[n] = cx(1.0, 0.0);
    let mut m = ComplexMatrix::zeros(n);
    for k in 1..=n {
        // M_k = A·M_{k-1} + c_{n-k+1}·I
        m = a.mul(&m).add_scaled_identity(c[n - k + 1]);
        c[n - k] = -a.mul(&m).trace() / cx(k as f64, 0.0);
    }
    Polynomial::new(c)
}
