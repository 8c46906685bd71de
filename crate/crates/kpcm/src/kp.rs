//! The tau-function side: determinant tau, pole extraction, tau shifts and
//! the bilinear identity, wave coefficients, residue/contour identities and
//! the finite-difference KP residual.

use crate::cm::{self, PhaseState, COLLISION_GUARD};
use crate::flows::{self, HierarchyTimes};
use crate::linalg::{
    char_poly, det, lu_solve, lu_solve_transposed, mat_exp, poly_roots, ComplexMatrix,
    ComplexVector,
};
use crate::{cx, Complex64, Error, Result};

const MAT_EXP_TOL: f64 = 1e-13;
const ROOTS_TOL: f64 = 1e-12;
/// Internal rtol for evolving a state to the evaluation times of the
/// shift/bilinear formulas.
const SHIFT_RTOL: f64 = 1e-12;

/// Generator bound accepted by the flow map (the exponential loses relative
/// accuracy far beyond this).
const GENERATOR_NORM_BOUND: f64 = 100.0;

/// Initial-data matrices of the determinant tau-function: L₀, W₀ and the
/// flow generators ℒ_k = (L₀+γI)^k − (L₀−γI)^k.
#[derive(Debug, Clone)]
pub struct FlowMatrixSet {
    l0: ComplexMatrix,
    w0: ComplexMatrix,
    cal: Vec<ComplexMatrix>,
    source: PhaseState,
}

impl FlowMatrixSet {
    /// Build from an initial state, with generators up to `k_max`.
    pub fn new(s: &PhaseState, k_max: usize) -> Self {
        let g = s.gamma();
        let l0 = cm::lax_matrix(s);
        let w0 = cm::w_matrix(s);
        let plus = l0.add_scaled_identity(g);
        let minus = l0.add_scaled_identity(-g);
        let mut cal = Vec::with_capacity(k_max);
        let mut pk = ComplexMatrix::identity(s.n());
        let mut mk = ComplexMatrix::identity(s.n());
        for _ in 1..=k_max {
            pk = pk.mul(&plus);
            mk = mk.mul(&minus);
            cal.push(pk.sub(&mk));
        }
        FlowMatrixSet {
            l0,
            w0,
            cal,
            source: s.clone(),
        }
    }

    pub fn source(&self) -> &PhaseState {
        &self.source
    }

    pub fn l0(&self) -> &ComplexMatrix {
        &self.l0
    }

    pub fn w0(&self) -> &ComplexMatrix {
        &self.w0
    }

    /// ℒ_k (1-based). ℒ₁ = 2γI.
    pub fn generator(&self, k: u32) -> Result<&ComplexMatrix> {
        self.cal
            .get(k as usize - 1)
            .ok_or_else(|| Error::invalid(format!("generator {k} beyond the precomputed range")))
    }

    fn weighted_generator(&self, times: &[(u32, f64)]) -> Result<ComplexMatrix> {
        let mut acc = ComplexMatrix::zeros(self.source.n());
        for &(k, t) in times {
            if k == 0 {
                return Err(Error::invalid("flow index 0 is not part of the hierarchy"));
            }
            acc = acc.add(&self.generator(k)?.scaled(cx(t, 0.0)));
        }
        if acc.inf_norm() > GENERATOR_NORM_BOUND {
            return Err(Error::invalid(
                "time-weighted generator norm exceeds the exp bound",
            ));
        }
        Ok(acc)
    }

    /// exp(−Σ t_k ℒ_k)·W₀, the matrix whose spectrum carries the poles.
    pub fn flow_matrix(&self, times: &HierarchyTimes) -> Result<ComplexMatrix> {
        self.flow_matrix_raw(&times.iter().collect::<Vec<_>>())
    }

    fn flow_matrix_raw(&self, times: &[(u32, f64)]) -> Result<ComplexMatrix> {
        let gen = self.weighted_generator(times)?;
        Ok(mat_exp(&gen.scaled(cx(-1.0, 0.0)), MAT_EXP_TOL)?.mul(&self.w0))
    }
}

/// Which route produced a tau value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauSource {
    RootProduct,
    Determinant,
}

/// A tau value together with its evaluation point and provenance.
#[derive(Debug, Clone)]
pub struct TauEvaluation {
    pub value: Complex64,
    pub w: Complex64,
    pub times: HierarchyTimes,
    pub source: TauSource,
}

/// τ(w) = Π_i (w − e^{2γx_i}) from the current poles.
pub fn tau_from_roots(s: &PhaseState, w: Complex64) -> Complex64 {
    let g = s.gamma();
    s.x()
        .iter()
        .map(|&x| w - (2.0 * g * x).exp())
        .product()
}

/// τ(t; w) = det(wI − exp(−Σ t_k ℒ_k) W₀).
pub fn tau_determinant(
    fm: &FlowMatrixSet,
    times: &HierarchyTimes,
    w: Complex64,
) -> Result<Complex64> {
    let k = fm.flow_matrix(times)?;
    Ok(det(&k.scalar_identity_minus(w)))
}

pub fn tau_evaluation(
    fm: &FlowMatrixSet,
    times: &HierarchyTimes,
    w: Complex64,
    source: TauSource,
) -> Result<TauEvaluation> {
    let value = match source {
        TauSource::RootProduct => tau_from_roots(fm.source(), w),
        TauSource::Determinant => tau_determinant(fm, times, w)?,
    };
    Ok(TauEvaluation {
        value,
        w,
        times: times.clone(),
        source,
    })
}

/// Minimum-cost assignment of roots to reference points (bitmask DP; the
/// sizes here make it exact and instant).
fn assign_roots(refs: &[Complex64], roots: &[Complex64]) -> Vec<usize> {
    let n = refs.len();
    debug_assert_eq!(n, roots.len());
    let full = (1usize << n) - 1;
    let mut cost = vec![f64::INFINITY; full + 1];
    let mut choice = vec![usize::MAX; full + 1];
    cost[0] = 0.0;
    for mask in 1..=full {
        let i = (mask as u32).count_ones() as usize - 1; // reference index
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let prev = cost[mask & !(1 << j)];
            let c = prev + (refs[i] - roots[j]).norm();
            if c < cost[mask] {
                cost[mask] = c;
                choice[mask] = j;
            }
        }
    }
    let mut perm = vec![0usize; n];
    let mut mask = full;
    while mask != 0 {
        let i = (mask as u32).count_ones() as usize - 1;
        let j = choice[mask];
        perm[i] = j;
        mask &= !(1 << j);
    }
    perm
}

/// Nearest-branch complex logarithm: x = x_ref + log(root/w_ref)/(2γ) + k·iπ/γ
/// with the integer k minimizing the displacement from the reference.
fn branch_log(
    gamma: Complex64,
    x_ref: Complex64,
    w_ref: Complex64,
    root: Complex64,
) -> Result<Complex64> {
    let base = (root / w_ref).ln() / (2.0 * gamma);
    let period = cx(0.0, std::f64::consts::PI) / gamma;
    let k0 = -(base * period.conj()).re / period.norm_sqr();
    let mut candidates: Vec<(f64, f64)> = [-1.0, 0.0, 1.0]
        .iter()
        .map(|d| {
            let k = k0.round() + d;
            (k, (base + period.scale(k)).norm())
        })
        .collect();
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (kbest, dbest) = candidates[0];
    let dsecond = candidates[1].1;
    if dsecond - dbest <= 1e-9 {
        return Err(Error::BranchAmbiguity {
            separation: dsecond - dbest,
        });
    }
    Ok(x_ref + base + period.scale(kbest))
}

/// One Newton iteration chain on w ↦ det(wI − K), using
/// step = −1/tr((wI − K)⁻¹). LU is backward stable entrywise, so this
/// recovers eigenvalues whose magnitudes span exponential ranges (the
/// regime of W₀ = diag(e^{2γx_i}), where the trace-recursion
/// characteristic polynomial loses the small ones).
fn det_newton_eigenvalue(k: &ComplexMatrix, start: Complex64) -> Option<Complex64> {
    let n = k.n();
    let mut w = start;
    // one extra quadratic step after the tolerance first triggers
    let mut polish_left = 1u32;
    for _ in 0..80 {
        let a = k.scalar_identity_minus(w);
        // tr((wI−K)⁻¹) via n unit solves on one factorization-worthy matrix
        let mut trace = Complex64::ZERO;
        for i in 0..n {
            let mut e = ComplexVector::zeros(n);
            e[i] = cx(1.0, 0.0);
            match crate::linalg::lu_solve_unguarded(&a, &e) {
                Ok(col) => trace += col[i],
                // exactly singular: w sits on the spectrum
                Err(_) => return Some(w),
            }
        }
        if trace == Complex64::ZERO {
            return None;
        }
        let step = cx(1.0, 0.0) / trace;
        w -= step;
        // relative criterion: the spectrum of exp(−Σt·ℒ)·W₀ never touches
        // zero but reaches exponentially small magnitudes
        if step.norm() <= 1e-13 * w.norm() {
            if polish_left == 0 {
                return Some(w);
            }
            polish_left -= 1;
        }
    }
    Some(w)
}

fn poles_with_reference(
    fm: &FlowMatrixSet,
    times: &[(u32, f64)],
    x_ref: &[Complex64],
) -> Result<ComplexVector> {
    let g = fm.source().gamma();
    let n = x_ref.len();
    let k = fm.flow_matrix_raw(times)?;
    let w_ref: Vec<Complex64> = x_ref.iter().map(|&x| (2.0 * g * x).exp()).collect();

    // coarse global root cloud (the characteristic-polynomial route loses
    // relative accuracy on exponentially small eigenvalues; it only has to
    // land each root in its Newton basin)
    let coarse: Vec<Complex64> = match char_poly(&k).and_then(|p| poly_roots(&p, ROOTS_TOL)) {
        Ok(roots) => roots.iter().copied().collect(),
        Err(_) => w_ref.clone(),
    };

    let mut polished: Vec<Complex64> = Vec::with_capacity(n);
    for &start in &coarse {
        polished.push(det_newton_eigenvalue(&k, start).unwrap_or(start));
    }

    // recover roots lost to basin merging: re-seed duplicates from the
    // references, which are themselves in-basin for every caller here
    for i in 0..n {
        let dup = polished
            .iter()
            .enumerate()
            .any(|(j, &r)| j != i && (r - polished[i]).norm() <= 1e-9 * (1.0 + r.norm()));
        if dup {
            if let Some(r) = det_newton_eigenvalue(&k, w_ref[i]) {
                let fresh = polished
                    .iter()
                    .enumerate()
                    .all(|(j, &q)| j == i || (q - r).norm() > 1e-9 * (1.0 + q.norm()));
                if fresh {
                    polished[i] = r;
                }
            }
        }
    }

    let perm = assign_roots(&w_ref, &polished);
    let mut out = Vec::with_capacity(n);
    for (i, &x) in x_ref.iter().enumerate() {
        out.push(branch_log(g, x, w_ref[i], polished[perm[i]])?);
    }
    Ok(ComplexVector::new(out))
}

/// Pole positions at the given times: eigenvalues of the flow matrix mapped
/// back through x = log(w)/(2γ), paired to the initial state by nearest
/// match in w-space and branch-corrected by continuity against it.
///
/// For tracking along a trajectory, pass the previous sample as reference
/// via [`poles_continuing`].
pub fn poles_at(fm: &FlowMatrixSet, times: &HierarchyTimes) -> Result<ComplexVector> {
    poles_with_reference(fm, &times.iter().collect::<Vec<_>>(), fm.source().x())
}

/// Same as [`poles_at`] with an explicit continuation reference.
pub fn poles_continuing(
    fm: &FlowMatrixSet,
    times: &HierarchyTimes,
    x_ref: &[Complex64],
) -> Result<ComplexVector> {
    poles_with_reference(fm, &times.iter().collect::<Vec<_>>(), x_ref)
}

/// u(x) = −Σ_i γ²/sinh²(γ(x − x_i)), the KP field carried by the poles.
pub fn u_eval(s: &PhaseState, xq: Complex64) -> Result<Complex64> {
    Ok(u_derivatives_at_poles(s.gamma(), s.x(), xq)?[0])
}

/// As [`u_eval`] from a bare pole set.
pub fn u_eval_at_poles(gamma: Complex64, poles: &[Complex64], xq: Complex64) -> Result<Complex64> {
    Ok(u_derivatives_at_poles(gamma, poles, xq)?[0])
}

/// u and its first four x-derivatives in closed form.
///
/// With f = csch²(u) and c = coth(u) (so f' = −2cf):
/// f''   = 2f² + 4c²f,
/// f'''  = −16cf² − 8c³f,
/// f'''' = 16f³ + 88c²f² + 16c⁴f,
/// and ∂ₓⁿ u = −γ^{n+2} Σ_i f⁽ⁿ⁾(γ(x − x_i)).
pub fn u_derivatives_at_poles(
    gamma: Complex64,
    poles: &[Complex64],
    xq: Complex64,
) -> Result<[Complex64; 5]> {
    let mut sums = [Complex64::ZERO; 5];
    for &xi in poles {
        let u = gamma * (xq - xi);
        let sh = u.sinh();
        let mag = sh.norm();
        if mag < COLLISION_GUARD {
            return Err(Error::EvaluationAtPole {
                value: mag,
                guard: COLLISION_GUARD,
            });
        }
        let f = cx(1.0, 0.0) / (sh * sh);
        let c = u.cosh() / sh;
        let f2 = f * f;
        let c2 = c * c;
        sums[0] += f;
        sums[1] += -2.0 * c * f;
        sums[2] += 2.0 * f2 + 4.0 * c2 * f;
        sums[3] += -16.0 * c * f2 - 8.0 * c * c2 * f;
        sums[4] += 16.0 * f2 * f + 88.0 * c2 * f2 + 16.0 * c2 * c2 * f;
    }
    let mut out = [Complex64::ZERO; 5];
    let mut pref = -(gamma * gamma);
    for (n, slot) in out.iter_mut().enumerate() {
        *slot = pref * sums[n];
        pref *= gamma;
    }
    Ok(out)
}

/// Evaluation context for the exact tau-shift trace formulas at one set of
/// times: carries the evolved L, the pole diagonal and the rank-one factor
/// Ẽ = aaᵀ with a_i = e^{γx_i}.
#[derive(Debug, Clone)]
pub struct ShiftContext {
    gamma: Complex64,
    l: ComplexMatrix,
    w_diag: Vec<Complex64>,
    a: ComplexVector,
}

impl ShiftContext {
    pub fn at_state(s: &PhaseState) -> Self {
        let g = s.gamma();
        ShiftContext {
            gamma: g,
            l: cm::lax_matrix(s),
            w_diag: s.x().iter().map(|&x| (2.0 * g * x).exp()).collect(),
            a: ComplexVector::new(s.x().iter().map(|&x| (g * x).exp()).collect()),
        }
    }

    /// Evolve the initial state of `fm` to `times` and build the context
    /// there. The shift identities are exact at any regular state, so the
    /// integration tolerance only selects the state being verified.
    pub fn from_times(fm: &FlowMatrixSet, times: &HierarchyTimes) -> Result<Self> {
        let state = if times.is_empty() {
            fm.source().clone()
        } else {
            flows::evolve_multi(fm.source(), times, SHIFT_RTOL)?
        };
        Ok(Self::at_state(&state))
    }

    fn pole_distance_guard(&self, w: Complex64) -> Result<()> {
        let min = self
            .w_diag
            .iter()
            .map(|&wi| (w - wi).norm())
            .fold(f64::INFINITY, f64::min);
        let threshold = 1e-12 * w.norm().max(1.0);
        if min < threshold {
            return Err(Error::SingularLinearSystem {
                pivot: min,
                threshold,
            });
        }
        Ok(())
    }

    fn divide_by_w(&self, v: &ComplexVector, w: Complex64, power: u32) -> ComplexVector {
        ComplexVector::new(
            v.iter()
                .zip(&self.w_diag)
                .map(|(&vi, &wi)| {
                    let mut out = vi;
                    for _ in 0..power {
                        out /= w - wi;
                    }
                    out
                })
                .collect(),
        )
    }

    fn resolvent_plus(&self, lambda: Complex64, v: &ComplexVector) -> Result<ComplexVector> {
        // ((λ+γ)I − L)⁻¹ v
        lu_solve(&self.l.scalar_identity_minus(lambda + self.gamma), v)
    }

    fn resolvent_minus(&self, mu: Complex64, v: &ComplexVector) -> Result<ComplexVector> {
        // ((μ−γ)I − L)⁻¹ v
        lu_solve(&self.l.scalar_identity_minus(mu - self.gamma), v)
    }

    /// Multiplier applied to τ(t) by a shift of the times:
    /// +[λ⁻¹], −[μ⁻¹], or both (with the λ−μ prefactor). `None` for a
    /// parameter leaves that shift out.
    pub fn shift_factor(
        &self,
        w: Complex64,
        lambda: Option<Complex64>,
        mu: Option<Complex64>,
    ) -> Result<Complex64> {
        self.pole_distance_guard(w)?;
        let two_g = 2.0 * self.gamma;
        match (lambda, mu) {
            (None, None) => Ok(cx(1.0, 0.0)),
            (Some(l), None) => {
                let t = self.resolvent_plus(l, &self.divide_by_w(&self.a, w, 1))?;
                Ok(cx(1.0, 0.0) + two_g * self.a.dot(&t))
            }
            (None, Some(m)) => {
                let t = self.divide_by_w(&self.resolvent_minus(m, &self.a)?, w, 1);
                Ok(cx(1.0, 0.0) - two_g * self.a.dot(&t))
            }
            (Some(l), Some(m)) => {
                let t = self.double_shift_trace(w, l, m, 1)?;
                Ok(cx(1.0, 0.0) - two_g * (l - m) * t)
            }
        }
    }

    /// tr[R_λ (wI−W)^{−pow} R_μ Ẽ] evaluated right-to-left.
    fn double_shift_trace(
        &self,
        w: Complex64,
        lambda: Complex64,
        mu: Complex64,
        pow: u32,
    ) -> Result<Complex64> {
        let t1 = self.resolvent_minus(mu, &self.a)?;
        let t2 = self.divide_by_w(&t1, w, pow);
        let t3 = self.resolvent_plus(lambda, &t2)?;
        Ok(self.a.dot(&t3))
    }

    /// Residual of the bilinear identity at (w, λ, μ) plus its natural
    /// cancellation scale (the sum of the term magnitudes).
    pub fn bilinear(
        &self,
        w: Complex64,
        lambda: Complex64,
        mu: Complex64,
    ) -> Result<(Complex64, f64)> {
        self.pole_distance_guard(w)?;
        let r_l = self.shift_factor(w, Some(lambda), None)?;
        let r_m = self.shift_factor(w, None, Some(mu))?;
        let r_lm = self.shift_factor(w, Some(lambda), Some(mu))?;
        let two_g = 2.0 * self.gamma;
        // ∂_w of the double-shift factor
        let dw = two_g * (lambda - mu) * self.double_shift_trace(w, lambda, mu, 2)?;
        let t1 = two_g * w * dw; // ∂_x τ-ratio term, ∂_x = 2γ w ∂_w
        let t2 = -(lambda - mu) * r_lm;
        let t3 = (lambda - mu) * r_l * r_m;
        let residual = t1 + t2 + t3;
        let scale = t1.norm() + t2.norm() + t3.norm();
        Ok((residual, scale))
    }
}

/// Tau multiplier for a time shift, at the state evolved to `times`.
pub fn tau_shift(
    fm: &FlowMatrixSet,
    times: &HierarchyTimes,
    w: Complex64,
    lambda: Option<Complex64>,
    mu: Option<Complex64>,
) -> Result<Complex64> {
    ShiftContext::from_times(fm, times)?.shift_factor(w, lambda, mu)
}

/// Residual of the bilinear identity; vanishes identically when the
/// commutation identity holds at the evaluation state.
pub fn bilinear_residual(
    fm: &FlowMatrixSet,
    times: &HierarchyTimes,
    w: Complex64,
    lambda: Complex64,
    mu: Complex64,
) -> Result<Complex64> {
    Ok(ShiftContext::from_times(fm, times)?
        .bilinear(w, lambda, mu)?
        .0)
}

/// Pole coefficients of the wave function and its adjoint at spectral
/// parameter z.
#[derive(Debug, Clone)]
pub struct WaveCoeffs {
    pub z: Complex64,
    pub c_tilde: ComplexVector,
    pub c_tilde_star: ComplexVector,
}

/// Solve the two pole-ansatz linear systems:
/// ((z−γ)I − L)·c̃ = −W^{1/2}e and c̃*·((z+γ)I − L) = eᵀW^{1/2}.
pub fn wave_coeffs(s: &PhaseState, z: Complex64) -> Result<WaveCoeffs> {
    let g = s.gamma();
    let l = cm::lax_matrix(s);
    let a = ComplexVector::new(s.x().iter().map(|&x| (g * x).exp()).collect());
    let c_tilde = lu_solve(&l.scalar_identity_minus(z - g), &a)?.scaled(cx(-1.0, 0.0));
    let c_tilde_star = lu_solve_transposed(&l.scalar_identity_minus(z + g), &a)?;
    Ok(WaveCoeffs {
        z,
        c_tilde,
        c_tilde_star,
    })
}

/// ‖∂_{t₂}c̃ − M c̃‖_∞ with the time derivative taken by central
/// differences along the integrated t₂ flow at fixed z.
pub fn wave_evolution_defect(s: &PhaseState, z: Complex64, h: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::invalid("wave_evolution_defect: h must lie in [1e-6, 1e-3]"));
    }
    let plus = flows::integrate(s, 2, h, SHIFT_RTOL)?.last().clone();
    let minus = flows::integrate(s, 2, -h, SHIFT_RTOL)?.last().clone();
    let cp = wave_coeffs(&plus, z)?.c_tilde;
    let cm_ = wave_coeffs(&minus, z)?.c_tilde;
    let fd = cp.sub(&cm_).scaled(cx(1.0 / (2.0 * h), 0.0));
    let mc = cm::m_matrix(s).mul_vec(&wave_coeffs(s, z)?.c_tilde);
    Ok(fd.sub(&mc).inf_norm())
}

/// ‖∂_{t₂}c̃* + c̃* M̃‖_∞, the adjoint companion of
/// [`wave_evolution_defect`].
pub fn adjoint_wave_evolution_defect(s: &PhaseState, z: Complex64, h: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::invalid(
            "adjoint_wave_evolution_defect: h must lie in [1e-6, 1e-3]",
        ));
    }
    let plus = flows::integrate(s, 2, h, SHIFT_RTOL)?.last().clone();
    let minus = flows::integrate(s, 2, -h, SHIFT_RTOL)?.last().clone();
    let cp = wave_coeffs(&plus, z)?.c_tilde_star;
    let cm_ = wave_coeffs(&minus, z)?.c_tilde_star;
    let fd = cp.sub(&cm_).scaled(cx(1.0 / (2.0 * h), 0.0));
    // row vector times M̃: multiply by the transpose
    let cmt = cm::m_tilde_matrix(s)
        .transpose()
        .mul_vec(&wave_coeffs(s, z)?.c_tilde_star);
    let mut defect = 0.0f64;
    for i in 0..fd.len() {
        defect = defect.max((fd[i] + cmt[i]).norm());
    }
    Ok(defect)
}

/// |central difference of the determinant-route poles along t_m − ∂ℋ_m/∂p|_∞:
/// the pole velocities must equal the trace-gradient flow. A 4th-order
/// five-point stencil keeps truncation below the identity tolerance even
/// for the fast high-m flows.
pub fn pole_velocity_defect(fm: &FlowMatrixSet, m: u32, h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::invalid("pole_velocity_defect: h must be positive"));
    }
    let at = |dt: f64| -> Result<ComplexVector> {
        poles_at(fm, &HierarchyTimes::from_pairs([(m, dt)])?)
    };
    let (xm2, xm1, xp1, xp2) = (at(-2.0 * h)?, at(-h)?, at(h)?, at(2.0 * h)?);
    let n = xm2.len();
    let denom = cx(12.0 * h, 0.0);
    let fd = ComplexVector::new(
        (0..n)
            .map(|i| (xm2[i] - 8.0 * xm1[i] + 8.0 * xp1[i] - xp2[i]) / denom)
            .collect(),
    );
    let gp = cm::grad_p(fm.source(), m);
    Ok(fd.sub(&gp).inf_norm())
}

/// (1/2πi)∮ z^m c̃*_i w_i⁻¹ c̃_i dz on the counterclockwise circle |z| = R
/// by the periodic trapezoid rule; equals ∂ℋ_m/∂p_i when R encloses the
/// spectrum of L ± γI.
pub fn contour_residue(
    s: &PhaseState,
    m: u32,
    radius: f64,
    q: usize,
) -> Result<ComplexVector> {
    if q < 64 {
        return Err(Error::invalid("contour_residue: need at least 64 nodes"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("contour_residue: radius must be positive"));
    }
    let g = s.gamma();
    let n = s.n();
    let w: Vec<Complex64> = s.x().iter().map(|&x| (2.0 * g * x).exp()).collect();
    let mut acc = vec![Complex64::ZERO; n];
    for j in 0..q {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / q as f64;
        let z = cx(radius * theta.cos(), radius * theta.sin());
        let wc = wave_coeffs(s, z)?;
        let zm = z.powu(m);
        for i in 0..n {
            // the extra z is the Jacobian of z = R e^{iθ} against dθ/2πi
            acc[i] += zm * wc.c_tilde_star[i] * wc.c_tilde[i] / w[i] * z;
        }
    }
    Ok(ComplexVector::new(
        acc.into_iter().map(|v| v / q as f64).collect(),
    ))
}

/// Residual of the KP equation together with the magnitude scale of its
/// terms.
#[derive(Debug, Clone, Copy)]
pub struct KpResidual {
    pub residual: Complex64,
    /// Σ of the |·| of the four assembled terms; the natural cancellation
    /// scale for tolerance checks.
    pub scale: f64,
}

/// Finite-difference residual 3u_{t₂t₂} − (4u_{t₃} − 12uu_x − u_{xxx})_x at
/// `xq`, with u built from determinant-route pole sets on a (t₂, t₃)
/// stencil of step `h`.
///
/// The x-derivatives of u are exact (closed-form pole sums); the two time
/// derivatives use second-order central differences, so the residual
/// converges as O(h²).
pub fn kp_residual(
    fm: &FlowMatrixSet,
    base_times: &HierarchyTimes,
    xq: Complex64,
    h: f64,
) -> Result<KpResidual> {
    if !(1e-4..=1e-2).contains(&h) {
        return Err(Error::invalid("kp_residual: h must lie in [1e-4, 1e-2]"));
    }
    let g = fm.source().gamma();
    let poles_shifted = |dt2: f64, dt3: f64| -> Result<ComplexVector> {
        let mut t = base_times.clone();
        t.insert(2, base_times.get(2).unwrap_or(0.0) + dt2)?;
        t.insert(3, base_times.get(3).unwrap_or(0.0) + dt3)?;
        poles_at(fm, &t)
    };

    let center = poles_shifted(0.0, 0.0)?;
    let d0 = u_derivatives_at_poles(g, center.as_slice(), xq)?;

    let u_at = |poles: &ComplexVector| -> Result<Complex64> {
        Ok(u_derivatives_at_poles(g, poles.as_slice(), xq)?[0])
    };
    let ux_at = |poles: &ComplexVector| -> Result<Complex64> {
        Ok(u_derivatives_at_poles(g, poles.as_slice(), xq)?[1])
    };

    let u_p = u_at(&poles_shifted(h, 0.0)?)?;
    let u_m = u_at(&poles_shifted(-h, 0.0)?)?;
    let ux_p = ux_at(&poles_shifted(0.0, h)?)?;
    let ux_m = ux_at(&poles_shifted(0.0, -h)?)?;

    let h2 = cx(h * h, 0.0);
    let u_t2t2 = (u_p - 2.0 * d0[0] + u_m) / h2;
    let ux_t3 = (ux_p - ux_m) / cx(2.0 * h, 0.0);

    let t1 = 3.0 * u_t2t2;
    let t2 = -4.0 * ux_t3;
    let t3 = 12.0 * (d0[1] * d0[1] + d0[0] * d0[2]); // (u u_x)_x = u_x² + u u_xx
    let t4 = d0[4];

    Ok(KpResidual {
        residual: t1 + t2 + t3 + t4,
        scale: t1.norm() + t2.norm() + t3.norm() + t4.norm(),
    })
}

/// Rank-one test of XZ − YX with X = −W, Z = L − γI, Y = L + γI: the
/// largest absolute 2×2 minor divided by the largest absolute entry.
/// Zero (to rounding) exactly when the commutation identity holds.
pub fn rank_one_defect(s: &PhaseState) -> f64 {
    let g = s.gamma();
    let l = cm::lax_matrix(s);
    let w = cm::w_matrix(s);
    let x = w.scaled(cx(-1.0, 0.0));
    let z = l.add_scaled_identity(-g);
    let y = l.add_scaled_identity(g);
    let d = x.mul(&z).sub(&y.mul(&x));
    let n = s.n();
    let max_entry = d.max_abs();
    if n < 2 || max_entry == 0.0 {
        return 0.0;
    }
    let mut max_minor = 0.0f64;
    for r0 in 0..n {
        for r1 in r0 + 1..n {
            for c0 in 0..n {
                for c1 in c0 + 1..n {
                    let minor = d[(r0, c0)] * d[(r1, c1)] - d[(r0, c1)] * d[(r1, c0)];
                    max_minor = max_minor.max(minor.norm());
                }
            }
        }
    }
    max_minor / max_entry
}

/// Double-shift factor reconstructed from shifted root sets: the times are
/// shifted by the truncated expansions of [λ⁻¹] − [μ⁻¹] (k ≤ k_trunc, λ and
/// μ real) and the pole product ratio is formed. Cross-checks the exact
/// trace formula up to the truncation error.
pub fn truncated_shift_ratio(
    fm: &FlowMatrixSet,
    lambda: f64,
    mu: f64,
    w: Complex64,
    k_trunc: u32,
) -> Result<Complex64> {
    let times: Vec<(u32, f64)> = (1..=k_trunc)
        .map(|k| {
            let kf = k as f64;
            (k, (lambda.powi(-(k as i32)) - mu.powi(-(k as i32))) / kf)
        })
        .collect();
    let shifted = poles_with_reference(fm, &times, fm.source().x())?;
    let g = fm.source().gamma();
    let mut ratio = cx(1.0, 0.0);
    for (i, &x0) in fm.source().x().iter().enumerate() {
        let w0 = (2.0 * g * x0).exp();
        let wi = (2.0 * g * shifted[i]).exp();
        ratio *= (w - wi) / (w - w0);
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Rng, StateOptions};

    fn single(gamma: f64, x: f64, p: f64) -> PhaseState {
        PhaseState::new(cx(gamma, 0.0), vec![cx(x, 0.0)], vec![cx(p, 0.0)]).unwrap()
    }

    #[test]
    fn tau_root_product_values() {
        let s = single(1.0, 0.0, 0.0);
        assert!((tau_from_roots(&s, cx(2.0, 0.0)) - cx(1.0, 0.0)).norm() < 1e-15);
        assert!(tau_from_roots(&s, cx(1.0, 0.0)).norm() < 1e-15);

        let s2 = PhaseState::new(
            cx(1.0, 0.0),
            vec![cx(0.0, 0.0), cx(1.0, 0.0)],
            vec![Complex64::ZERO; 2],
        )
        .unwrap();
        let t = tau_from_roots(&s2, Complex64::ZERO);
        assert!((t - cx(7.38905609893065, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn generators_start_at_two_gamma() {
        let mut rng = Rng::new(31);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let fm = FlowMatrixSet::new(&s, 4);
        let expect = ComplexMatrix::identity(3).scaled(2.0 * s.gamma());
        assert!(fm.generator(1).unwrap().sub(&expect).max_abs() < 1e-13);
    }

    #[test]
    fn tau_determinant_matches_roots_at_zero_times() {
        let mut rng = Rng::new(33);
        let s = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let fm = FlowMatrixSet::new(&s, 8);
        let times = HierarchyTimes::new();
        for k in 0..20 {
            let w = cx(
                2.0 * (k as f64 * 0.7).cos() + 0.3,
                1.5 * (k as f64 * 1.3).sin(),
            );
            let a = tau_determinant(&fm, &times, w).unwrap();
            let b = tau_from_roots(&s, w);
            let scale = a.norm().max(b.norm()).max(1.0);
            assert!((a - b).norm() <= 1e-12 * scale, "w={w} a={a} b={b}");
        }
    }

    #[test]
    fn single_particle_tau_under_flows() {
        // third flow moves the single zero-momentum pole: τ = w − e^{−2t}
        let s = single(1.0, 0.0, 0.0);
        let fm = FlowMatrixSet::new(&s, 4);
        let times = HierarchyTimes::from_pairs([(3, 0.1)]).unwrap();
        let w = cx(1.7, 0.4);
        let tau = tau_determinant(&fm, &times, w).unwrap();
        let expect = w - cx((-0.2_f64).exp(), 0.0);
        assert!((tau - expect).norm() < 1e-13);

        // even flow freezes it: τ = w − 1 for any t₂
        let times = HierarchyTimes::from_pairs([(2, 0.35)]).unwrap();
        let tau = tau_determinant(&fm, &times, w).unwrap();
        assert!((tau - (w - cx(1.0, 0.0))).norm() < 1e-13);
    }

    #[test]
    fn pole_extraction_trivial_and_shift() {
        let mut rng = Rng::new(37);
        let s = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let fm = FlowMatrixSet::new(&s, 8);

        let x0 = poles_at(&fm, &HierarchyTimes::new()).unwrap();
        for i in 0..4 {
            assert!((x0[i] - s.x()[i]).norm() < 1e-12);
        }

        let a = 0.23;
        let times = HierarchyTimes::from_pairs([(1, a)]).unwrap();
        let x1 = poles_at(&fm, &times).unwrap();
        for i in 0..4 {
            assert!((x1[i] - (s.x()[i] - cx(a, 0.0))).norm() < 1e-12);
        }

        let s1 = single(1.0, 0.0, 0.0);
        let fm1 = FlowMatrixSet::new(&s1, 4);
        let times = HierarchyTimes::from_pairs([(3, 0.1)]).unwrap();
        let x = poles_at(&fm1, &times).unwrap();
        assert!((x[0] - cx(-0.1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn u_values_periodicity_and_log_tau() {
        let s = single(1.0, 0.0, 0.0);
        let u = u_eval(&s, cx(1.0, 0.0)).unwrap();
        assert!((u - cx(-0.7240616609663106, 0.0)).norm() < 1e-13);

        // single period iπ/γ
        let mut rng = Rng::new(43);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let xq = cx(0.31, 0.17);
        let period = cx(0.0, std::f64::consts::PI);
        let u0 = u_eval(&s, xq).unwrap();
        let u1 = u_eval(&s, xq + period).unwrap();
        assert!((u0 - u1).norm() <= 1e-10 * u0.norm().max(1.0));

        // u = ∂²ₓ log τ via second differences of the root product
        let h = 1e-4;
        let g = s.gamma();
        let tau_at = |x: Complex64| tau_from_roots(&s, (2.0 * g * x).exp());
        let t0 = tau_at(xq);
        let ratio_p = (tau_at(xq + cx(h, 0.0)) / t0).ln();
        let ratio_m = (tau_at(xq - cx(h, 0.0)) / t0).ln();
        let fd = (ratio_p + ratio_m) / cx(h * h, 0.0);
        assert!((fd - u0).norm() <= 1e-6 * u0.norm().max(1.0), "fd={fd} u={u0}");
    }

    #[test]
    fn u_derivative_formulas_match_finite_differences() {
        let mut rng = Rng::new(47);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let xq = cx(0.4, 0.6);
        let d = u_derivatives_at_poles(s.gamma(), s.x(), xq).unwrap();
        let h = 1e-4;
        let u = |x: Complex64| u_eval(&s, x).unwrap();
        let (um2, um1, u0, up1, up2) = (
            u(xq - cx(2.0 * h, 0.0)),
            u(xq - cx(h, 0.0)),
            u(xq),
            u(xq + cx(h, 0.0)),
            u(xq + cx(2.0 * h, 0.0)),
        );
        let fd1 = (up1 - um1) / cx(2.0 * h, 0.0);
        let fd2 = (up1 - 2.0 * u0 + um1) / cx(h * h, 0.0);
        let fd3 = (up2 - 2.0 * up1 + 2.0 * um1 - um2) / cx(2.0 * h * h * h, 0.0);
        assert!((d[1] - fd1).norm() <= 1e-6 * d[1].norm().max(1.0));
        assert!((d[2] - fd2).norm() <= 1e-5 * d[2].norm().max(1.0));
        assert!((d[3] - fd3).norm() <= 1e-3 * d[3].norm().max(1.0));
        // 4th derivative: compare against second difference of u_xx (exact)
        let uxx = |x: Complex64| u_derivatives_at_poles(s.gamma(), s.x(), x).unwrap()[2];
        let fd4 = (uxx(xq + cx(h, 0.0)) - 2.0 * uxx(xq) + uxx(xq - cx(h, 0.0))) / cx(h * h, 0.0);
        assert!((d[4] - fd4).norm() <= 1e-5 * d[4].norm().max(1.0));
    }

    #[test]
    fn shift_factor_scalar_and_asymptotics() {
        let s = single(1.0, 0.2, 0.4);
        let ctx = ShiftContext::at_state(&s);
        let w = cx(3.0, 1.0);
        let w1 = (2.0 * s.gamma() * s.x()[0]).exp();
        let lambda = cx(4.0, 0.5);
        let factor = ctx.shift_factor(w, Some(lambda), None).unwrap();
        let expect =
            cx(1.0, 0.0) + 2.0 * s.gamma() * w1 / ((lambda + s.gamma() + s.p()[0]) * (w - w1));
        assert!((factor - expect).norm() < 1e-13);

        // λ → ∞ decays to 1
        let far = ctx.shift_factor(w, Some(cx(1e9, 0.0)), None).unwrap();
        assert!((far - cx(1.0, 0.0)).norm() < 1e-8);

        // λ = μ double shift is exactly 1
        let both = ctx.shift_factor(w, Some(lambda), Some(lambda)).unwrap();
        assert!((both - cx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bilinear_residual_vanishes() {
        let mut rng = Rng::new(51);
        for n in 1..=5usize {
            let s = rng.state(n, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
            let ctx = ShiftContext::at_state(&s);
            let lnorm = cm::lax_matrix(&s).inf_norm();
            for _ in 0..20 {
                let lambda = cx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
                    * cx(lnorm + 3.0, 0.0);
                let mu = cx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
                    * cx(lnorm + 4.0, 0.0);
                let w = cx(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
                if ctx.pole_distance_guard(w).is_err() {
                    continue;
                }
                let (res, scale) = match ctx.bilinear(w, lambda, mu) {
                    Ok(v) => v,
                    Err(Error::SingularLinearSystem { .. }) => continue,
                    Err(e) => panic!("unexpected error {e:?}"),
                };
                assert!(
                    res.norm() <= 1e-10 * scale.max(1e-30),
                    "n={n} res={} scale={}",
                    res.norm(),
                    scale
                );
            }
        }
    }

    #[test]
    fn bilinear_residual_at_evolved_times() {
        let mut rng = Rng::new(53);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let fm = FlowMatrixSet::new(&s, 8);
        let times = HierarchyTimes::from_pairs([(2, 0.12), (3, 0.05)]).unwrap();
        let ctx = ShiftContext::from_times(&fm, &times).unwrap();
        let (res, scale) = ctx.bilinear(cx(1.9, 1.1), cx(6.0, 1.0), cx(-5.5, 0.7)).unwrap();
        assert!(res.norm() <= 1e-10 * scale.max(1e-30));
    }

    #[test]
    fn wave_coefficients() {
        let s = single(1.0, 0.0, 0.0);
        let wc = wave_coeffs(&s, cx(3.0, 0.0)).unwrap();
        assert!((wc.c_tilde[0] - cx(-0.5, 0.0)).norm() < 1e-14);

        let mut rng = Rng::new(57);
        let s = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let z = cx(2.5, 1.5);
        let wc = wave_coeffs(&s, z).unwrap();
        // defining relation re-substitution
        let g = s.gamma();
        let l = cm::lax_matrix(&s);
        let lhs = l
            .scalar_identity_minus(z - g)
            .mul_vec(&wc.c_tilde);
        let a = ComplexVector::new(s.x().iter().map(|&x| (g * x).exp()).collect());
        let defect = lhs.sub(&a.scaled(cx(-1.0, 0.0))).inf_norm();
        assert!(defect <= 1e-12 * a.inf_norm().max(1.0));

        // large-z resolvent expansion: c̃ = −W^{1/2}e/z + O(z⁻²)
        let zbig = cx(3e4, 1e4);
        let wc = wave_coeffs(&s, zbig).unwrap();
        for i in 0..4 {
            let leading = -a[i] / zbig;
            assert!((wc.c_tilde[i] - leading).norm() < 10.0 / zbig.norm_sqr());
        }
    }

    #[test]
    fn wave_evolution_follows_m() {
        let s = single(1.0, 0.1, 0.3);
        let d = wave_evolution_defect(&s, cx(2.4, 0.9), 1e-4).unwrap();
        assert!(d <= 1e-6, "single-particle defect {d}");

        let mut rng = Rng::new(61);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let d = wave_evolution_defect(&s, cx(2.9, 1.3), 1e-4).unwrap();
        assert!(d <= 1e-6, "three-particle defect {d}");

        // leading resolvent asymptotics: the defect decays like 1/z
        let near = wave_evolution_defect(&s, cx(3.0, 1.0), 1e-4).unwrap();
        let far = wave_evolution_defect(&s, cx(30.0, 10.0), 1e-4).unwrap();
        assert!(far <= near / 3.0, "near {near} far {far}");
    }

    #[test]
    fn adjoint_wave_evolution_follows_m_tilde() {
        let s = single(1.0, 0.1, 0.3);
        let d = adjoint_wave_evolution_defect(&s, cx(2.4, 0.9), 1e-4).unwrap();
        assert!(d <= 1e-6, "single-particle adjoint defect {d}");

        let mut rng = Rng::new(65);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let d = adjoint_wave_evolution_defect(&s, cx(3.1, 1.1), 1e-4).unwrap();
        assert!(d <= 1e-6, "three-particle adjoint defect {d}");
    }

    #[test]
    fn imaginary_coupling_pole_flow() {
        // the trigonometric family proper: purely imaginary γ
        let mut rng = Rng::new(87);
        let s = rng.state(2, cx(0.0, 0.8), &StateOptions::flow()).unwrap();
        let fm = FlowMatrixSet::new(&s, 8);
        let times = HierarchyTimes::from_pairs([(2, 0.1)]).unwrap();
        let evolved = flows::integrate(&s, 2, 0.1, 1e-11).unwrap().last().clone();
        let poles = poles_continuing(&fm, &times, evolved.x()).unwrap();
        for i in 0..2 {
            assert!(
                (poles[i] - evolved.x()[i]).norm() < 1e-7,
                "pole {i}: {} vs {}",
                poles[i],
                evolved.x()[i]
            );
        }
    }

    #[test]
    fn bilinear_is_degenerate_at_equal_parameters() {
        let mut rng = Rng::new(63);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let ctx = ShiftContext::at_state(&s);
        let lam = cx(6.5, 1.2);
        let (res, _) = ctx.bilinear(cx(2.0, 1.0), lam, lam).unwrap();
        assert_eq!(res, Complex64::ZERO); // every term carries the λ−μ factor
    }

    #[test]
    fn pole_velocities_match_gradients() {
        let s = single(1.0, 0.05, 0.0);
        let fm = FlowMatrixSet::new(&s, 8);
        // first flow: both sides are exactly −1
        assert!(pole_velocity_defect(&fm, 1, 1e-5).unwrap() < 1e-9);
        // third flow, zero momentum: both sides −γ²
        assert!(pole_velocity_defect(&fm, 3, 1e-5).unwrap() < 1e-8);

        let mut rng = Rng::new(67);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let fm = FlowMatrixSet::new(&s, 8);
        let scale = cm::grad_p(&s, 2).inf_norm().max(1.0);
        assert!(pole_velocity_defect(&fm, 2, 1e-5).unwrap() <= 1e-7 * scale);
    }

    #[test]
    fn contour_residue_matches_gradients() {
        let mut rng = Rng::new(71);
        let s = rng.state(2, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let spectral_bound = cm::lax_matrix(&s).inf_norm() + 1.0;

        // m = 0 integrand is O(z⁻²): zero vector
        let r0 = contour_residue(&s, 0, spectral_bound + 2.0, 256).unwrap();
        assert!(r0.inf_norm() < 1e-10);

        for m in 1..=3u32 {
            let gp = cm::grad_p(&s, m);
            let r = contour_residue(&s, m, spectral_bound + 2.0, 512).unwrap();
            let r2 = contour_residue(&s, m, spectral_bound + 4.0, 512).unwrap();
            let scale = gp.inf_norm().max(1.0);
            assert!(r.sub(&gp).inf_norm() <= 1e-9 * scale, "m={m}");
            assert!(r.sub(&r2).inf_norm() <= 1e-9 * scale, "radius dependence at m={m}");
        }
    }

    #[test]
    fn kp_residual_small_and_second_order() {
        // stationary single soliton: u depends on x only
        let s = single(1.0, 0.0, 0.0);
        let fm = FlowMatrixSet::new(&s, 8);
        let base = HierarchyTimes::new();
        let r = kp_residual(&fm, &base, cx(0.6, 0.4), 1e-3).unwrap();
        assert!(r.residual.norm() <= 1e-6 * r.scale.max(1.0), "residual {}", r.residual);

        let mut rng = Rng::new(73);
        let s = rng.state(2, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let fm = FlowMatrixSet::new(&s, 8);
        let xq = s.x()[0] + cx(0.45, 0.3);
        let r1 = kp_residual(&fm, &base, xq, 1e-3).unwrap();
        let r2 = kp_residual(&fm, &base, xq, 5e-4).unwrap();
        assert!(r1.residual.norm() <= 1e-4 * r1.scale);
        let ratio = r1.residual.norm() / r2.residual.norm().max(1e-300);
        assert!(ratio >= 3.0, "halving ratio {ratio}");
    }

    #[test]
    fn rank_one_defect_detects_structure() {
        let s = single(1.0, 0.3, 0.8);
        assert_eq!(rank_one_defect(&s), 0.0);

        let mut rng = Rng::new(79);
        let s = rng.state(4, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        assert!(rank_one_defect(&s) <= 1e-12);

        // breaking one Lax entry must be detected; rebuild the product by hand
        let g = s.gamma();
        let mut l = cm::lax_matrix(&s);
        l[(0, 1)] += cx(1.0, 0.0);
        let w = cm::w_matrix(&s);
        let x = w.scaled(cx(-1.0, 0.0));
        let d = x
            .mul(&l.add_scaled_identity(-g))
            .sub(&l.add_scaled_identity(g).mul(&x));
        let mut max_minor = 0.0f64;
        let n = s.n();
        for r0 in 0..n {
            for r1 in r0 + 1..n {
                for c0 in 0..n {
                    for c1 in c0 + 1..n {
                        let minor = d[(r0, c0)] * d[(r1, c1)] - d[(r0, c1)] * d[(r1, c0)];
                        max_minor = max_minor.max(minor.norm());
                    }
                }
            }
        }
        assert!(max_minor / d.max_abs() >= 0.1);
    }

    #[test]
    fn tau_evaluation_carries_provenance() {
        let s = single(1.0, 0.1, 0.2);
        let fm = FlowMatrixSet::new(&s, 4);
        let times = HierarchyTimes::from_pairs([(2, 0.1)]).unwrap();
        let w = cx(2.0, 0.5);
        let a = tau_evaluation(&fm, &times, w, TauSource::Determinant).unwrap();
        let b = tau_evaluation(&fm, &times, w, TauSource::RootProduct).unwrap();
        assert_eq!(a.source, TauSource::Determinant);
        assert_eq!(a.w, w);
        assert_eq!(b.value, tau_from_roots(&s, w));
        assert_eq!(a.times.get(2), Some(0.1));
    }

    #[test]
    fn half_period_pole_motion_is_ambiguous() {
        // imaginary coupling, one particle: the t₁ shift moves the pole by
        // exactly half the period iπ/γ, so the two nearest branches tie
        let s = PhaseState::new(cx(0.0, 1.0), vec![Complex64::ZERO], vec![Complex64::ZERO])
            .unwrap();
        let fm = FlowMatrixSet::new(&s, 4);
        let times = HierarchyTimes::from_pairs([(1, std::f64::consts::FRAC_PI_2)]).unwrap();
        let err = poles_at(&fm, &times).unwrap_err();
        assert!(matches!(err, Error::BranchAmbiguity { .. }), "got {err:?}");
    }

    #[test]
    fn truncated_shift_cross_check() {
        let mut rng = Rng::new(83);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let fm = FlowMatrixSet::new(&s, 12);
        let (lambda, mu) = (14.0, -11.0);
        let w = cx(2.4, 1.6);
        let exact = ShiftContext::at_state(&s)
            .shift_factor(w, Some(cx(lambda, 0.0)), Some(cx(mu, 0.0)))
            .unwrap();
        let truncated = truncated_shift_ratio(&fm, lambda, mu, w, 12).unwrap();
        assert!(
            (exact - truncated).norm() <= 1e-6 * exact.norm().max(1.0),
            "exact {exact} truncated {truncated}"
        );
    }
}
