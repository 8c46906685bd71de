//! Simultaneous polynomial root finding (Aberth-Ehrlich iteration).

use super::{ComplexVector, Polynomial};
use crate::{cx, Complex64, Error, Result};

const MAX_ITERATIONS: usize = 200;

/// All roots with multiplicity.
///
/// Starts on a circle of radius `1 + max|a_k/a_n|` (Cauchy bound) and
/// iterates the Aberth-Ehrlich correction until the largest step falls
/// below `tol·(1 + |z|)`; a couple of Newton polish steps follow. Each
/// returned root satisfies `|p(r)| ≤ tol·scale(p, r)` with
/// `scale = ‖a‖_∞·max(1, |r|)^deg`.
pub fn poly_roots(p: &Polynomial, tol: f64) -> Result<ComplexVector> {
    if p.degree() < 1 {
        return Err(Error::invalid("poly_roots: degree must be at least 1"));
    }
    if p.leading() == Complex64::ZERO {
        return Err(Error::invalid("poly_roots: leading coefficient is zero"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("poly_roots: tolerance must be positive"));
    }
    let n = p.degree();

    // Work on the monic normalization for a clean Cauchy bound.
    let lead = p.leading();
    let monic: Vec<Complex64> = p.coeffs().iter().map(|c| c / lead).collect();
    let monic = Polynomial::new(monic).expect("monic coefficients are finite");
    let dmonic = monic.derivative();

    let bound = 1.0
        + monic.coeffs()[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.35) / n as f64;
            cx(bound * angle.cos(), bound * angle.sin())
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let pv = monic.eval(z[i]);
            if pv == Complex64::ZERO {
                continue;
            }
            let dv = dmonic.eval(z[i]);
            if dv == Complex64::ZERO {
                // at a critical point: nudge off and retry next sweep
                let nudge = cx(1e-8 * (1.0 + z[i].norm()), 0.0);
                z[i] += nudge;
                max_step = f64::INFINITY;
                continue;
            }
            let newton = pv / dv;
            let mut repulsion = Complex64::ZERO;
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d == Complex64::ZERO {
                        continue;
                    }
                    repulsion += cx(1.0, 0.0) / d;
                }
            }
            let denom = cx(1.0, 0.0) - newton * repulsion;
            let step = if denom == Complex64::ZERO { newton } else { newton / denom };
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_step <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::RootsNotConverged {
            iterations: MAX_ITERATIONS,
        });
    }

    // Newton polish on the original polynomial (simple roots benefit; for
    // multiple roots the step is already below tol and the guard keeps it).
    let dp = p.derivative();
    for zi in z.iter_mut() {
        for _ in 0..2 {
            let pv = p.eval(*zi);
            let dv = dp.eval(*zi);
            if dv == Complex64::ZERO {
                break;
            }
            let step = pv / dv;
            if step.norm() > 0.5 * (1.0 + zi.norm()) {
                break;
            }
            *zi -= step;
        }
    }

    // Backward-error verification.
    let coeff_scale = p.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    for &r in &z {
        let scale = coeff_scale * r.norm().max(1.0).powi(n as i32);
        if p.eval(r).norm() > tol * scale {
            return Err(Error::RootsNotConverged {
                iterations: MAX_ITERATIONS,
            });
        }
    }

    Ok(ComplexVector::new(z))
}
