//! Trigonometric Calogero-Moser phase space: Lax matrix, auxiliary
//! matrices, hierarchy Hamiltonians and their gradients.
//!
//! Positions and momenta are complex throughout; the coupling γ may be real
//! (hyperbolic potential) or imaginary (trigonometric), treated as one
//! family. All half-powers of the exponentiated positions w_i = e^{2γx_i}
//! are taken as e^{γx_i}, never as a square root of w_i, which removes any
//! branch ambiguity from the matrix formulas.

use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::{cx, Complex64, Error, Result};

/// Default minimum for |sinh(γ(x_i − x_j))|; below it the pairwise
/// interaction blows up with a third-order pole.
pub const COLLISION_GUARD: f64 = 1e-8;

/// Coupling, positions and momenta of N particles; the phase point of the
/// hierarchy. Construction enforces pairwise regularity, so every function
/// taking a `&PhaseState` works on a regular configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    gamma: Complex64,
    x: Vec<Complex64>,
    p: Vec<Complex64>,
    guard: f64,
}

impl PhaseState {
    pub fn new(gamma: Complex64, x: Vec<Complex64>, p: Vec<Complex64>) -> Result<Self> {
        Self::with_guard(gamma, x, p, COLLISION_GUARD)
    }

    pub fn with_guard(
        gamma: Complex64,
        x: Vec<Complex64>,
        p: Vec<Complex64>,
        guard: f64,
    ) -> Result<Self> {
        if x.is_empty() || x.len() != p.len() {
            return Err(Error::invalid(
                "phase state needs matching nonempty position/momentum lists",
            ));
        }
        if !gamma.re.is_finite() || !gamma.im.is_finite() || gamma == Complex64::ZERO {
            return Err(Error::invalid("coupling gamma must be finite and nonzero"));
        }
        let finite = |v: &[Complex64]| v.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite(&x) || !finite(&p) {
            return Err(Error::invalid("positions and momenta must be finite"));
        }
        let s = PhaseState { gamma, x, p, guard };
        let min = s.min_pair_sinh();
        if min < guard {
            return Err(Error::PoleCollision { value: min, guard });
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    pub fn x(&self) -> &[Complex64] {
        &self.x
    }

    pub fn p(&self) -> &[Complex64] {
        &self.p
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    /// min over pairs of |sinh(γ(x_i − x_j))|; ∞ for a single particle.
    pub fn min_pair_sinh(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                min = min.min((self.gamma * (self.x[i] - self.x[j])).sinh().norm());
            }
        }
        min
    }

    /// Same state with replaced positions and momenta (keeps γ and guard).
    pub fn with_coords(&self, x: Vec<Complex64>, p: Vec<Complex64>) -> Result<Self> {
        Self::with_guard(self.gamma, x, p, self.guard)
    }
}

/// The matrix quadruple of the auxiliary linear problem.
#[derive(Debug, Clone)]
pub struct LaxPair {
    pub l: ComplexMatrix,
    pub m: ComplexMatrix,
    pub m_tilde: ComplexMatrix,
    pub w: ComplexMatrix,
}

impl LaxPair {
    pub fn build(s: &PhaseState) -> Self {
        LaxPair {
            l: lax_matrix(s),
            m: m_matrix(s),
            m_tilde: m_tilde_matrix(s),
            w: w_matrix(s),
        }
    }
}

/// Lax matrix: L_ij = −p_i δ_ij − (1 − δ_ij) γ / sinh(γ(x_i − x_j)).
pub fn lax_matrix(s: &PhaseState) -> ComplexMatrix {
    let g = s.gamma;
    ComplexMatrix::from_fn(s.n(), |i, j| {
        if i == j {
            -s.p[i]
        } else {
            -g / (g * (s.x[i] - s.x[j])).sinh()
        }
    })
}

/// Diagonal matrix of exponentiated positions w_i = e^{2γx_i}.
pub fn w_matrix(s: &PhaseState) -> ComplexMatrix {
    let entries: Vec<Complex64> = s.x.iter().map(|&x| (2.0 * s.gamma * x).exp()).collect();
    ComplexMatrix::diagonal(&entries)
}

/// Branch-fixed square root of `w_matrix`: diag(e^{γx_i}).
pub fn w_sqrt_matrix(s: &PhaseState) -> ComplexMatrix {
    let entries: Vec<Complex64> = s.x.iter().map(|&x| (s.gamma * x).exp()).collect();
    ComplexMatrix::diagonal(&entries)
}

/// Second matrix of the auxiliary pair, with ẋ_i = 2p_i substituted:
/// M_ij = 2γp_i δ_ij − 8γ² δ_ij Σ_{k≠i} w_i w_k/(w_i−w_k)²
///        + 8γ² (1−δ_ij) w_i^{3/2} w_j^{1/2}/(w_i−w_j)².
pub fn m_matrix(s: &PhaseState) -> ComplexMatrix {
    let g = s.gamma;
    let n = s.n();
    let w: Vec<Complex64> = s.x.iter().map(|&x| (2.0 * g * x).exp()).collect();
    let wh: Vec<Complex64> = s.x.iter().map(|&x| (g * x).exp()).collect();
    let g2 = g * g;
    ComplexMatrix::from_fn(n, |i, j| {
        if i == j {
            let mut inter = Complex64::ZERO;
            for k in 0..n {
                if k != i {
                    let d = w[i] - w[k];
                    inter += w[i] * w[k] / (d * d);
                }
            }
            2.0 * g * s.p[i] - 8.0 * g2 * inter
        } else {
            let d = w[i] - w[j];
            8.0 * g2 * w[i] * wh[i] * wh[j] / (d * d)
        }
    })
}

/// Companion of `m_matrix` for the adjoint problem:
/// M̃_ij = −2γ ẋ_i δ_ij + M_ji.
pub fn m_tilde_matrix(s: &PhaseState) -> ComplexMatrix {
    let m = m_matrix(s);
    let g = s.gamma;
    ComplexMatrix::from_fn(s.n(), |i, j| {
        let base = m[(j, i)];
        if i == j {
            base - 4.0 * g * s.p[i]
        } else {
            base
        }
    })
}

/// Defect of the basic commutation identity:
/// [L, W] − 2γ (W^{1/2} E W^{1/2} − W), expected to vanish.
pub fn commutation_defect(s: &PhaseState) -> ComplexMatrix {
    let l = lax_matrix(s);
    let w = w_matrix(s);
    let wh = w_sqrt_matrix(s);
    let comm = l.mul(&w).sub(&w.mul(&l));
    let n = s.n();
    let rank1 = ComplexMatrix::from_fn(n, |i, j| wh[(i, i)] * wh[(j, j)]);
    let rhs = rank1.sub(&w).scaled(2.0 * s.gamma);
    comm.sub(&rhs)
}

/// Trace Hamiltonian H_k = tr L^k.
pub fn hamiltonian_trace(s: &PhaseState, k: u32) -> Complex64 {
    assert!(k >= 1, "hamiltonian index must be at least 1");
    lax_matrix(s).pow(k as usize).trace()
}

/// Hierarchy Hamiltonian
/// ℋ_m = tr((L + γI)^{m+1} − (L − γI)^{m+1}) / (2(m+1)γ).
///
/// A linear combination of the trace Hamiltonians; the first differences
/// are ℋ_2 − H_2 = Nγ²/3, ℋ_3 − H_3 = γ²H_1 and
/// ℋ_4 − H_4 = 2γ²H_2 + Nγ⁴/5 (the m = 2 constant is forced by the
/// binomial expansion even though it is usually left implicit).
pub fn hierarchy_hamiltonian(s: &PhaseState, m: u32) -> Complex64 {
    assert!(m >= 1, "flow index must be at least 1");
    let g = s.gamma;
    let l = lax_matrix(s);
    let plus = l.add_scaled_identity(g).pow(m as usize + 1);
    let minus = l.add_scaled_identity(-g).pow(m as usize + 1);
    (plus.trace() - minus.trace()) / (2.0 * (m as f64 + 1.0) * g)
}

/// ∂ℋ_m/∂p_i = −[(L+γI)^m − (L−γI)^m]_ii / (2γ), the position velocities
/// of the m-th flow.
pub fn grad_p(s: &PhaseState, m: u32) -> ComplexVector {
    assert!(m >= 1, "flow index must be at least 1");
    let g = s.gamma;
    let l = lax_matrix(s);
    let plus = l.add_scaled_identity(g).pow(m as usize);
    let minus = l.add_scaled_identity(-g).pow(m as usize);
    ComplexVector::new(
        (0..s.n())
            .map(|i| -(plus[(i, i)] - minus[(i, i)]) / (2.0 * g))
            .collect(),
    )
}

/// ∂ℋ_m/∂x_i = tr(∂L/∂x_i · [(L+γI)^m − (L−γI)^m]) / (2γ).
///
/// ∂L/∂x_i is sparse (row i and column i only), so the trace reduces to a
/// single sum over the partner index; the momentum flow is
/// ∂_{t_m} p_i = −∂ℋ_m/∂x_i.
pub fn grad_x(s: &PhaseState, m: u32) -> ComplexVector {
    assert!(m >= 1, "flow index must be at least 1");
    let g = s.gamma;
    let n = s.n();
    let l = lax_matrix(s);
    let diff = l
        .add_scaled_identity(g)
        .pow(m as usize)
        .sub(&l.add_scaled_identity(-g).pow(m as usize));
    let mut out = vec![Complex64::ZERO; n];
    for i in 0..n {
        let mut acc = Complex64::ZERO;
        for j in 0..n {
            if j == i {
                continue;
            }
            let u = g * (s.x[i] - s.x[j]);
            let sh = u.sinh();
            let q = g * g * u.cosh() / (sh * sh);
            acc += q * (diff[(j, i)] - diff[(i, j)]);
        }
        out[i] = acc / (2.0 * g);
    }
    ComplexVector::new(out)
}

/// Closed-form accelerations of the t₂ flow:
/// ẍ_i = −8γ³ Σ_{j≠i} cosh(γ x_ij)/sinh³(γ x_ij).
pub fn acceleration(s: &PhaseState) -> ComplexVector {
    let g = s.gamma;
    let n = s.n();
    let g3 = g * g * g;
    let mut out = vec![Complex64::ZERO; n];
    for i in 0..n {
        let mut acc = Complex64::ZERO;
        for j in 0..n {
            if j == i {
                continue;
            }
            let u = g * (s.x[i] - s.x[j]);
            let sh = u.sinh();
            acc += u.cosh() / (sh * sh * sh);
        }
        out[i] = -8.0 * g3 * acc;
    }
    ComplexVector::new(out)
}

/// ‖L̇ + [L, M]‖_∞ with L̇ assembled in closed form from the t₂-flow
/// derivatives (ẋ_i = 2p_i, ṗ_i = −∂ℋ₂/∂x_i); vanishes when the Lax
/// representation holds.
pub fn lax_compat_defect(s: &PhaseState) -> f64 {
    let g = s.gamma;
    let n = s.n();
    let l = lax_matrix(s);
    let m = m_matrix(s);
    let p_dot = grad_x(s, 2).scaled(cx(-1.0, 0.0));
    let l_dot = ComplexMatrix::from_fn(n, |i, j| {
        if i == j {
            -p_dot[i]
        } else {
            let u = g * (s.x[i] - s.x[j]);
            let sh = u.sinh();
            let q = g * g * u.cosh() / (sh * sh);
            q * (2.0 * s.p[i] - 2.0 * s.p[j])
        }
    });
    let comm = l.mul(&m).sub(&m.mul(&l));
    l_dot.add(&comm).inf_norm()
}

/// c'(u) = −γ²/sinh²(γu), the derivative of the pair kernel γ·coth(γu).
fn pair_kernel_deriv(gamma: Complex64, u: Complex64) -> Complex64 {
    let sh = (gamma * u).sinh();
    -(gamma * gamma) / (sh * sh)
}

/// The four explicit Hamiltonian sums
///
/// H₁ = −Σ p_i,
/// H₂ = Σ p_i² + Σ_{i≠j} c'(x_ij),
/// H₃ = −Σ p_i³ − 3 Σ_{i≠j} p_i c'(x_ij),
/// H₄ = Σ p_i⁴ + Σ_{i≠j} (4p_i² + 2p_ip_j) c'(x_ij)
///      + 2 Σ c'(x_ij) c'(x_jk) + Σ_{i≠j} c'(x_ij)²,
///
/// with c'(u) = −γ²/sinh²(γu). The H₄ triple sum is over pairwise-distinct
/// (i, j, k); with that reading the sums reproduce tr L^k exactly (the
/// pairwise-distinct four-cycle sums of the kernel cancel identically).
pub fn explicit_hamiltonians(s: &PhaseState) -> [Complex64; 4] {
    explicit_hamiltonians_with(s, TripleSumIndexing::PairwiseDistinct)
}

/// Index constraint reading for the H₄ triple sum; kept explicit because the
/// two readings are numerically distinguishable (only the pairwise-distinct
/// one differs from tr L⁴ by a state-independent amount).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleSumIndexing {
    /// i, j, k pairwise distinct.
    PairwiseDistinct,
    /// only adjacent indices distinct (i ≠ j, j ≠ k; i = k allowed).
    AdjacentDistinct,
}

pub fn explicit_hamiltonians_with(s: &PhaseState, idx: TripleSumIndexing) -> [Complex64; 4] {
    let g = s.gamma;
    let n = s.n();
    let p = &s.p;
    let cp = |i: usize, j: usize| pair_kernel_deriv(g, s.x[i] - s.x[j]);

    let h1 = -p.iter().sum::<Complex64>();
    let mut h2 = p.iter().map(|&q| q * q).sum::<Complex64>();
    let mut h3 = -p.iter().map(|&q| q * q * q).sum::<Complex64>();
    let mut h4 = p.iter().map(|&q| q * q * q * q).sum::<Complex64>();

    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = cp(i, j);
            h2 += c;
            h3 -= 3.0 * p[i] * c;
            h4 += (4.0 * p[i] * p[i] + 2.0 * p[i] * p[j]) * c + c * c;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == j {
                    continue;
                }
                if idx == TripleSumIndexing::PairwiseDistinct && k == i {
                    continue;
                }
                h4 += 2.0 * cp(i, j) * cp(j, k);
            }
        }
    }
    [h1, h2, h3, h4]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Rng, StateOptions};

    fn state(gamma: Complex64, x: &[(f64, f64)], p: &[(f64, f64)]) -> PhaseState {
        PhaseState::new(
            gamma,
            x.iter().map(|&(a, b)| cx(a, b)).collect(),
            p.iter().map(|&(a, b)| cx(a, b)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn lax_single_particle_and_two_body() {
        let s = state(cx(1.0, 0.0), &[(0.0, 0.0)], &[(2.0, 0.0)]);
        let l = lax_matrix(&s);
        assert_eq!(l[(0, 0)], cx(-2.0, 0.0));

        let s = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0); 2]);
        let l = lax_matrix(&s);
        // -gamma/sinh(-1) = +1/sinh(1)
        assert!((l[(0, 1)] - cx(0.8509181282393216, 0.0)).norm() < 1e-14);
        assert!((l[(1, 0)] + cx(0.8509181282393216, 0.0)).norm() < 1e-14);
        assert_eq!(l[(0, 0)], Complex64::ZERO);
    }

    #[test]
    fn lax_small_gamma_approaches_rational_kernel() {
        let x = [(0.0, 0.0), (1.0, 0.0)];
        let p = [(0.0, 0.0), (0.0, 0.0)];
        let s = state(cx(1e-4, 0.0), &x, &p);
        let l = lax_matrix(&s);
        // off-diagonal → −1/(x_i − x_j) = +1
        assert!((l[(0, 1)] - cx(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn w_matrix_values() {
        let s = state(cx(1.0, 0.0), &[(0.0, 0.0)], &[(0.0, 0.0)]);
        assert_eq!(w_matrix(&s)[(0, 0)], cx(1.0, 0.0));

        let s = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0); 2]);
        let w = w_matrix(&s);
        assert!((w[(1, 1)] - cx(7.38905609893065, 0.0)).norm() < 1e-13);

        // imaginary coupling walks the unit circle: e^{i·pi} = −1
        let s = state(
            cx(0.0, std::f64::consts::FRAC_PI_2),
            &[(1.0, 0.0)],
            &[(0.0, 0.0)],
        );
        assert!((w_matrix(&s)[(0, 0)] - cx(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn m_matrix_single_and_two_body() {
        let s = state(cx(1.0, 0.0), &[(0.3, 0.0)], &[(0.7, 0.0)]);
        let m = m_matrix(&s);
        assert!((m[(0, 0)] - cx(1.4, 0.0)).norm() < 1e-14); // 2·gamma·p

        let s = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0); 2]);
        let m = m_matrix(&s);
        let w2 = 7.38905609893065_f64;
        let diag = -8.0 * w2 / (1.0 - w2).powi(2);
        assert!((m[(0, 0)] - cx(diag, 0.0)).norm() < 1e-12);
        assert!((m[(1, 1)] - cx(diag, 0.0)).norm() < 1e-12);
        let off01 = 8.0 * w2.sqrt() / (1.0 - w2).powi(2);
        let off10 = 8.0 * w2 * w2.sqrt() / (1.0 - w2).powi(2);
        assert!((m[(0, 1)] - cx(off01, 0.0)).norm() < 1e-12);
        assert!((m[(1, 0)] - cx(off10, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn m_tilde_diagonal_relation() {
        let mut rng = Rng::new(11);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let m = m_matrix(&s);
        let mt = m_tilde_matrix(&s);
        for i in 0..3 {
            let expect = -4.0 * s.gamma() * s.p()[i] + m[(i, i)];
            assert!((mt[(i, i)] - expect).norm() < 1e-13);
        }
        // off-diagonal is the plain transpose
        assert_eq!(mt[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn commutation_identity_on_random_states() {
        let mut rng = Rng::new(5);
        for &(gre, gim) in &[(1.0, 0.0), (0.5, 0.0), (0.0, 2.0)] {
            for n in [1usize, 2, 5] {
                let s = rng.state(n, cx(gre, gim), &StateOptions::algebraic()).unwrap();
                let defect = commutation_defect(&s).inf_norm();
                let scale = lax_matrix(&s).inf_norm() * w_matrix(&s).inf_norm();
                assert!(defect <= 1e-12 * scale.max(1.0), "defect {defect} scale {scale}");
            }
        }
    }

    #[test]
    fn hamiltonian_values() {
        let s = state(cx(1.0, 0.0), &[(0.0, 0.0)], &[(2.0, 0.0)]);
        assert!((hamiltonian_trace(&s, 3) - cx(-8.0, 0.0)).norm() < 1e-13);

        let s2 = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0); 2]);
        // tr L² = −2/sinh²(1)
        assert!((hamiltonian_trace(&s2, 2) - cx(-1.4481233219326213, 0.0)).norm() < 1e-13);

        let s3 = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.5)], &[(1.0, 0.0), (2.0, -0.3)]);
        let h1 = hamiltonian_trace(&s3, 1);
        assert!((h1 - cx(-3.0, 0.3)).norm() < 1e-13); // −Σ p_i

        // single particle at rest: ℋ₂ = γ²/3
        let s4 = state(cx(1.0, 0.0), &[(0.2, 0.0)], &[(0.0, 0.0)]);
        assert!((hierarchy_hamiltonian(&s4, 2) - cx(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hierarchy_decomposition() {
        let mut rng = Rng::new(23);
        for n in [2usize, 4, 6] {
            let s = rng.state(n, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
            let g2 = s.gamma() * s.gamma();
            let nn = n as f64;

            let d2 = hierarchy_hamiltonian(&s, 2) - hamiltonian_trace(&s, 2);
            let scale2 = hierarchy_hamiltonian(&s, 2).norm().max(1.0);
            assert!((d2 - g2 * nn / 3.0).norm() <= 1e-11 * scale2);

            let d3 = hierarchy_hamiltonian(&s, 3) - hamiltonian_trace(&s, 3);
            let expect3 = g2 * hamiltonian_trace(&s, 1);
            let scale3 = hierarchy_hamiltonian(&s, 3).norm().max(1.0);
            assert!((d3 - expect3).norm() <= 1e-11 * scale3);

            let d4 = hierarchy_hamiltonian(&s, 4) - hamiltonian_trace(&s, 4);
            let expect4 = 2.0 * g2 * hamiltonian_trace(&s, 2) + g2 * g2 * nn / 5.0;
            let scale4 = hierarchy_hamiltonian(&s, 4).norm().max(1.0);
            assert!((d4 - expect4).norm() <= 1e-11 * scale4);

            // m = 1 collapses to the plain trace
            assert!(
                (hierarchy_hamiltonian(&s, 1) - hamiltonian_trace(&s, 1)).norm() < 1e-12
            );
        }
    }

    #[test]
    fn grad_p_values() {
        let s = state(cx(1.0, 0.0), &[(0.0, 0.0)], &[(0.5, 0.0)]);
        let gp = grad_p(&s, 2);
        assert!((gp[0] - cx(1.0, 0.0)).norm() < 1e-14); // 2p

        let s = state(cx(1.0, 0.0), &[(0.0, 0.0)], &[(1.0, 0.0)]);
        let gp = grad_p(&s, 3);
        assert!((gp[0] - cx(-4.0, 0.0)).norm() < 1e-14); // −3p² − γ²

        let mut rng = Rng::new(3);
        let s = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let gp = grad_p(&s, 1);
        for i in 0..4 {
            assert!((gp[i] - cx(-1.0, 0.0)).norm() < 1e-12); // uniform shift flow
        }
    }

    #[test]
    fn grad_x_values_and_translation_symmetry() {
        let s = state(cx(1.0, 0.0), &[(0.4, 0.0)], &[(0.9, 0.0)]);
        assert_eq!(grad_x(&s, 3)[0], Complex64::ZERO);

        let s = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0); 2]);
        let gx = grad_x(&s, 2);
        assert!((gx[0] - cx(-3.8028740389040787, 0.0)).norm() < 1e-12);

        let mut rng = Rng::new(17);
        for n in [3usize, 5] {
            let s = rng.state(n, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
            for m in 1..=6u32 {
                let gx = grad_x(&s, m);
                let total: Complex64 = gx.iter().copied().sum();
                let scale = gx.inf_norm().max(1.0);
                assert!(total.norm() <= 1e-10 * scale, "m={m} total={total}");
            }
        }
    }

    #[test]
    fn acceleration_values_and_consistency() {
        let s = state(cx(1.0, 0.0), &[(0.0, 0.0)], &[(0.3, 0.0)]);
        assert_eq!(acceleration(&s)[0], Complex64::ZERO);

        let s = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0); 2]);
        let a = acceleration(&s);
        assert!((a[0] - cx(7.605748077808157, 0.0)).norm() < 1e-12);
        assert!((a[1] + cx(7.605748077808157, 0.0)).norm() < 1e-12);

        let mut rng = Rng::new(29);
        let s = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let a = acceleration(&s);
        let gx = grad_x(&s, 2);
        for i in 0..4 {
            assert!((a[i] + 2.0 * gx[i]).norm() <= 1e-10 * a.inf_norm().max(1.0));
        }
    }

    #[test]
    fn lax_compatibility_on_random_states() {
        let mut rng = Rng::new(41);
        let s1 = state(cx(1.0, 0.0), &[(0.1, 0.0)], &[(0.4, 0.0)]);
        assert!(lax_compat_defect(&s1) < 1e-14);
        for n in [3usize, 6] {
            let s = rng.state(n, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
            let scale = lax_matrix(&s).inf_norm() * m_matrix(&s).inf_norm();
            assert!(lax_compat_defect(&s) <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn explicit_sums_match_traces() {
        let s = state(cx(1.0, 0.0), &[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (2.0, 0.0)]);
        let [h1, ..] = explicit_hamiltonians(&s);
        assert!((h1 - cx(-3.0, 0.0)).norm() < 1e-14);

        let mut rng = Rng::new(53);
        for n in [2usize, 4, 5] {
            let s = rng.state(n, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
            let [_, h2, h3, h4] = explicit_hamiltonians(&s);
            let t2 = hamiltonian_trace(&s, 2);
            let t3 = hamiltonian_trace(&s, 3);
            let scale = t2.norm().max(t3.norm()).max(1.0);
            assert!((h2 - t2).norm() <= 1e-10 * scale);
            assert!((h3 - t3).norm() <= 1e-10 * scale);
            // pairwise-distinct reading: H4 − tr L⁴ is state-independent
            let s2 = rng.state(n, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
            let [_, _, _, h4b] = explicit_hamiltonians(&s2);
            let diff_a = h4 - hamiltonian_trace(&s, 4);
            let diff_b = h4b - hamiltonian_trace(&s2, 4);
            let scale4 = hamiltonian_trace(&s, 4).norm().max(1.0);
            assert!((diff_a - diff_b).norm() <= 1e-10 * scale4);
        }
    }

    #[test]
    fn adjacent_distinct_reading_is_state_dependent() {
        let mut rng = Rng::new(59);
        let s1 = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let s2 = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let d = |s: &PhaseState| {
            explicit_hamiltonians_with(s, TripleSumIndexing::AdjacentDistinct)[3]
                - hamiltonian_trace(s, 4)
        };
        assert!((d(&s1) - d(&s2)).norm() > 1e-3);
    }

    #[test]
    fn collision_guard_rejects_close_pairs() {
        let r = PhaseState::new(
            cx(1.0, 0.0),
            vec![cx(0.0, 0.0), cx(1e-10, 0.0)],
            vec![Complex64::ZERO; 2],
        );
        assert!(matches!(r, Err(Error::PoleCollision { .. })));

        let r = PhaseState::new(cx(0.0, 0.0), vec![cx(0.0, 0.0)], vec![Complex64::ZERO]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
