//! Self-contained dense complex linear algebra for desk-scale matrices.
//!
//! Everything downstream (Lax matrices, resolvents, flow maps, the
//! determinant tau-function) is built on the square [`ComplexMatrix`] and
//! [`ComplexVector`] here. Sizes stay below ~16, so the implementations
//! favour clarity and exact contracts over asymptotics.

mod charpoly;
mod expm;
mod lu;
mod poly;
mod roots;

pub use charpoly::char_poly;
pub use expm::mat_exp;
pub(crate) use lu::lu_solve_unguarded;
pub use lu::{det, lu_solve, lu_solve_transposed};
pub use poly::Polynomial;
pub use roots::poly_roots;

use crate::{cx, Complex64};
use std::ops::{Index, IndexMut};

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        ComplexMatrix {
            n,
            data: vec![Complex64::ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = cx(1.0, 0.0);
        }
        m
    }

    /// Build from an entry function `f(row, col)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch in matrix product");
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.n, v.len(), "dimension mismatch in matrix-vector product");
        let mut out = vec![Complex64::ZERO; self.n];
        for i in 0..self.n {
            let mut acc = Complex64::ZERO;
            for j in 0..self.n {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        ComplexVector::new(out)
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> ComplexMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= c;
        }
        out
    }

    /// `self + c·I`.
    pub fn add_scaled_identity(&self, c: Complex64) -> ComplexMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out[(i, i)] += c;
        }
        out
    }

    /// `w·I − self`, the resolvent numerator shape used everywhere.
    pub fn scalar_identity_minus(&self, w: Complex64) -> ComplexMatrix {
        let mut out = self.scaled(cx(-1.0, 0.0));
        for i in 0..self.n {
            out[(i, i)] += w;
        }
        out
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// A^k by repeated multiplication; `k` stays small at desk scale.
    pub fn pow(&self, k: usize) -> ComplexMatrix {
        let mut out = ComplexMatrix::identity(self.n);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    data: Vec<Complex64>,
}

impl ComplexVector {
    pub fn new(data: Vec<Complex64>) -> Self {
        ComplexVector { data }
    }

    pub fn zeros(n: usize) -> Self {
        ComplexVector {
            data: vec![Complex64::ZERO; n],
        }
    }

    pub fn ones(n: usize) -> Self {
        ComplexVector {
            data: vec![cx(1.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.data.iter()
    }

    /// Unconjugated bilinear dot product `Σ aᵢ bᵢ` (the trace formulas of the
    /// tau-function shifts are bilinear, not sesquilinear).
    pub fn dot(&self, other: &ComplexVector) -> Complex64 {
        assert_eq!(self.len(), other.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sub(&self, other: &ComplexVector) -> ComplexVector {
        assert_eq!(self.len(), other.len());
        ComplexVector::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scaled(&self, c: Complex64) -> ComplexVector {
        ComplexVector::new(self.data.iter().map(|a| a * c).collect())
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.data[i]
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(data: Vec<Complex64>) -> Self {
        ComplexVector { data }
    }
}
