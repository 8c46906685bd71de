//! Complex polynomials (degree-ascending coefficients).

use crate::{Complex64, Error, Result};

/// Polynomial with coefficients stored degree-ascending; trailing exact
/// zeros are trimmed so `degree = coeffs.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == Complex64::ZERO {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::invalid("polynomial needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("polynomial coefficients must be finite"));
        }
        Ok(Polynomial { coeffs })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Polynomial {
                coeffs: vec![Complex64::ZERO],
            };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * Complex64::new(k as f64, 0.0))
            .collect();
        Polynomial { coeffs }
    }

    /// `Σ_k |a_k| r^k`, the natural magnitude scale of the polynomial at `|z| = r`.
    pub fn magnitude_at(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        let mut rp = 1.0;
        for c in &self.coeffs {
            acc += c.norm() * rp;
            rp *= r;
        }
        acc
    }
}
