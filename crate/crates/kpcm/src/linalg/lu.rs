//! LU factorization with partial pivoting: solves and determinants.

use super::{ComplexMatrix, ComplexVector};
use crate::{Complex64, Error, Result};

/// Pivot threshold relative to the row-sum norm of the input.
const PIVOT_RTOL: f64 = 1e-14;

struct LuFactors {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    sign_flips: usize,
}

/// Factor with partial pivoting. `threshold` is the absolute pivot floor;
/// pass 0.0 to accept any nonzero pivot (determinant path).
fn factor(a: &ComplexMatrix, threshold: f64) -> Result<LuFactors> {
    let n = a.n();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign_flips = 0usize;

    for col in 0..n {
        let (mut best_row, mut best_mag) = (col, lu[(col, col)].norm());
        for row in col + 1..n {
            let mag = lu[(row, col)].norm();
            if mag > best_mag {
                best_row = row;
                best_mag = mag;
            }
        }
        if best_mag <= threshold {
            return Err(Error::SingularLinearSystem {
                pivot: best_mag,
                threshold,
            });
        }
        if best_row != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(best_row, j)];
                lu[(best_row, j)] = tmp;
            }
            perm.swap(col, best_row);
            sign_flips += 1;
        }
        let pivot = lu[(col, col)];
        for row in col + 1..n {
            let factor = lu[(row, col)] / pivot;
            lu[(row, col)] = factor;
            for j in col + 1..n {
                let sub = factor * lu[(col, j)];
                lu[(row, j)] -= sub;
            }
        }
    }
    Ok(LuFactors {
        lu,
        perm,
        sign_flips,
    })
}

fn solve_factored(f: &LuFactors, b: &ComplexVector) -> ComplexVector {
    let n = f.lu.n();
    let mut y = vec![Complex64::ZERO; n];
    for i in 0..n {
        let mut acc = b[f.perm[i]];
        for j in 0..i {
            acc -= f.lu[(i, j)] * y[j];
        }
        y[i] = acc;
    }
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in i + 1..n {
            acc -= f.lu[(i, j)] * y[j];
        }
        y[i] = acc / f.lu[(i, i)];
    }
    ComplexVector::new(y)
}

/// Solve `A x = b` with partial pivoting.
///
/// Fails with [`Error::SingularLinearSystem`] when a pivot magnitude drops
/// below `1e-14 · ‖A‖_∞`.
pub fn lu_solve(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    if a.n() != b.len() {
        return Err(Error::invalid("lu_solve: dimension mismatch"));
    }
    let f = factor(a, PIVOT_RTOL * a.inf_norm())?;
    Ok(solve_factored(&f, b))
}

/// Solve `Aᵀ y = b` (used for the row-vector wave coefficients).
pub fn lu_solve_transposed(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    lu_solve(&a.transpose(), b)
}

/// Solve without the relative pivot floor (errors only on an exactly zero
/// pivot). Newton iterations on det(wI − K) drive the matrix towards
/// singularity on purpose; the huge near-null solution components are the
/// signal, not a failure.
pub(crate) fn lu_solve_unguarded(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    let f = factor(a, 0.0)?;
    Ok(solve_factored(&f, b))
}

/// Determinant via LU with pivot-sign tracking; returns 0 for singular input.
pub fn det(a: &ComplexMatrix) -> Complex64 {
    match factor(a, 0.0) {
        Ok(f) => {
            let mut d = (0..a.n()).map(|i| f.lu[(i, i)]).product::<Complex64>();
            if f.sign_flips % 2 == 1 {
                d = -d;
            }
            d
        }
        Err(_) => Complex64::ZERO,
    }
}
