//! Parameter-dependent Bäcklund map of the pole dynamics: the coupled coth
//! system, its generating function, and the large-parameter expansion that
//! packages the higher flows.

use crate::cm::{self, PhaseState};
use crate::linalg::{lu_solve, ComplexMatrix, ComplexVector};
use crate::{cx, Complex64, Error, Result};

const MAX_NEWTON_ITERATIONS: u32 = 50;
const NEWTON_RTOL: f64 = 1e-12;

/// A source state (x, p), its image (y, p̃) and the map parameter μ.
#[derive(Debug, Clone)]
pub struct BacklundPair {
    pub source: PhaseState,
    pub target_y: Vec<Complex64>,
    pub target_p: Vec<Complex64>,
    pub mu: Complex64,
    pub iterations: u32,
}

fn coth(u: Complex64) -> Complex64 {
    u.cosh() / u.sinh()
}

/// c'(u) = −γ²/sinh²(γu).
fn pair_kernel_deriv(gamma: Complex64, u: Complex64) -> Complex64 {
    let sh = (gamma * u).sinh();
    -(gamma * gamma) / (sh * sh)
}

/// γ Σ_{k≠i} coth(γ(x_i − x_k)) for each i.
fn self_coth_sums(gamma: Complex64, x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = Complex64::ZERO;
            for k in 0..n {
                if k != i {
                    acc += coth(gamma * (x[i] - x[k]));
                }
            }
            gamma * acc
        })
        .collect()
}

/// Residual of the coth system γ Σ_k coth(γ(x_i − u_k)) = b_i; errors when
/// an argument crosses the collision guard.
fn coth_system_residual(
    gamma: Complex64,
    anchors: &[Complex64],
    u: &[Complex64],
    b: &[Complex64],
    guard: f64,
) -> Result<Vec<Complex64>> {
    let n = anchors.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Complex64::ZERO;
        for k in 0..n {
            let arg = gamma * (anchors[i] - u[k]);
            let sh = arg.sinh();
            if sh.norm() < guard {
                return Err(Error::PoleCollision {
                    value: sh.norm(),
                    guard,
                });
            }
            acc += arg.cosh() / sh;
        }
        out.push(gamma * acc - b[i]);
    }
    Ok(out)
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Newton solve of γ Σ_k coth(γ(x_i − u_k)) = b_i for u, with analytic
/// Jacobian J_ij = γ²/sinh²(γ(x_i − u_j)) and a halving line search.
fn solve_coth_system(
    gamma: Complex64,
    anchors: &[Complex64],
    b: &[Complex64],
    seed: Vec<Complex64>,
    guard: f64,
    scale: f64,
) -> Result<(Vec<Complex64>, u32)> {
    let n = anchors.len();
    let mut u = seed;
    let mut f = coth_system_residual(gamma, anchors, &u, b, guard)?;
    let tol = NEWTON_RTOL * scale;

    for iter in 1..=MAX_NEWTON_ITERATIONS {
        if inf_norm(&f) <= tol {
            return Ok((u, iter - 1));
        }
        let jac = ComplexMatrix::from_fn(n, |i, j| -pair_kernel_deriv(gamma, anchors[i] - u[j]));
        let step = lu_solve(&jac, &ComplexVector::new(f.clone()))?;

        let mut damping = 1.0f64;
        let mut advanced = false;
        let current = inf_norm(&f);
        for _ in 0..8 {
            let trial: Vec<Complex64> = u
                .iter()
                .enumerate()
                .map(|(i, &ui)| ui - cx(damping, 0.0) * step[i])
                .collect();
            match coth_system_residual(gamma, anchors, &trial, b, guard) {
                Ok(tf) if inf_norm(&tf) < current => {
                    u = trial;
                    f = tf;
                    advanced = true;
                    break;
                }
                _ => damping *= 0.5,
            }
        }
        if !advanced {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                residual: current,
            });
        }
    }
    let residual = inf_norm(&f);
    if residual <= tol {
        Ok((u, MAX_NEWTON_ITERATIONS))
    } else {
        Err(Error::NewtonDivergence {
            iterations: MAX_NEWTON_ITERATIONS,
            residual,
        })
    }
}

fn newton_scale(s: &PhaseState, mu: Complex64) -> f64 {
    (s.gamma().norm() + mu.norm() + inf_norm(s.p())).max(1.0)
}

/// Default Newton seed: the first two terms of the large-μ expansion,
/// y = x + μ⁻¹·(1,…,1) − μ⁻²·p. This selects the branch continuous with
/// y → x as μ → ∞.
pub fn default_seed(s: &PhaseState, mu: Complex64) -> Vec<Complex64> {
    let inv = cx(1.0, 0.0) / mu;
    let inv2 = inv * inv;
    s.x()
        .iter()
        .zip(s.p())
        .map(|(&x, &p)| x + inv - inv2 * p)
        .collect()
}

/// Solve the Bäcklund system for the image positions y, then evaluate the
/// image momenta from the companion equation set.
pub fn transform(s: &PhaseState, mu: Complex64) -> Result<BacklundPair> {
    transform_seeded(s, mu, default_seed(s, mu))
}

pub fn transform_seeded(
    s: &PhaseState,
    mu: Complex64,
    y_init: Vec<Complex64>,
) -> Result<BacklundPair> {
    let g = s.gamma();
    let guard = s.guard();
    let self_sums = self_coth_sums(g, s.x());
    let b: Vec<Complex64> = (0..s.n())
        .map(|i| -s.p()[i] - mu + self_sums[i])
        .collect();
    let (y, iterations) = solve_coth_system(g, s.x(), &b, y_init, guard, newton_scale(s, mu))?;

    // image momenta: p̃_i = −μ − γΣ_{k≠i}coth(γ(y_i−y_k)) + γΣ_k coth(γ(y_i−x_k))
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            let sh = (g * (y[i] - y[j])).sinh().norm();
            if sh < guard {
                return Err(Error::PoleCollision { value: sh, guard });
            }
        }
    }
    let y_self = self_coth_sums(g, &y);
    let mut target_p = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let mut cross = Complex64::ZERO;
        for k in 0..y.len() {
            cross += coth(g * (y[i] - s.x()[k]));
        }
        target_p.push(-mu - y_self[i] + g * cross);
    }

    Ok(BacklundPair {
        source: s.clone(),
        target_y: y,
        target_p,
        mu,
        iterations,
    })
}

/// Positions z = e^{+D(μ)}x obtained by solving the companion equation set
/// of the map with the roles of the two point sets reversed, anchored at
/// the same state.
pub fn backward_positions(s: &PhaseState, mu: Complex64) -> Result<Vec<Complex64>> {
    let g = s.gamma();
    let self_sums = self_coth_sums(g, s.x());
    let b: Vec<Complex64> = (0..s.n())
        .map(|i| s.p()[i] + mu + self_sums[i])
        .collect();
    let inv = cx(1.0, 0.0) / mu;
    let inv2 = inv * inv;
    let seed: Vec<Complex64> = s
        .x()
        .iter()
        .zip(s.p())
        .map(|(&x, &p)| x - inv + inv2 * p)
        .collect();
    let (z, _) = solve_coth_system(g, s.x(), &b, seed, s.guard(), newton_scale(s, mu))?;
    Ok(z)
}

/// Generating function of the canonical map (principal-branch logs; only
/// its derivatives enter testable claims, and those are branch-free):
/// F = Σ_{i<j} log[sinh(γx_ij)sinh(γy_ij)] − Σ_{i,j} log sinh(γ(x_i−y_j))
///     − μ Σ_i (x_i − y_i).
pub fn generating_function(
    x: &[Complex64],
    y: &[Complex64],
    mu: Complex64,
    gamma: Complex64,
) -> Result<Complex64> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::invalid("generating_function: length mismatch"));
    }
    let guard = cm::COLLISION_GUARD;
    let checked_sinh = |u: Complex64| -> Result<Complex64> {
        let sh = (gamma * u).sinh();
        if sh.norm() < guard {
            return Err(Error::PoleCollision {
                value: sh.norm(),
                guard,
            });
        }
        Ok(sh)
    };
    let mut f = Complex64::ZERO;
    for i in 0..n {
        for j in i + 1..n {
            f += (checked_sinh(x[i] - x[j])? * checked_sinh(y[i] - y[j])?).ln();
        }
    }
    for i in 0..n {
        for j in 0..n {
            f -= checked_sinh(x[i] - y[j])?.ln();
        }
    }
    let shift: Complex64 = x.iter().zip(y).map(|(&a, &b)| a - b).sum();
    f -= mu * shift;
    Ok(f)
}

/// max over i of |p_i − ∂F/∂x_i| and |p̃_i + ∂F/∂y_i| with the partials in
/// closed form; vanishes exactly on a solved pair.
pub fn canonical_defect(pair: &BacklundPair) -> Result<f64> {
    let s = &pair.source;
    let g = s.gamma();
    let guard = s.guard();
    let n = s.n();
    let x = s.x();
    let y = &pair.target_y;

    let checked_coth = |u: Complex64| -> Result<Complex64> {
        let sh = (g * u).sinh();
        if sh.norm() < guard {
            return Err(Error::PoleCollision {
                value: sh.norm(),
                guard,
            });
        }
        Ok((g * u).cosh() / sh)
    };

    let mut defect = 0.0f64;
    for i in 0..n {
        // ∂F/∂x_i = γΣ_{j≠i}coth(γx_ij) − γΣ_j coth(γ(x_i−y_j)) − μ
        let mut dfdx = -pair.mu;
        for j in 0..n {
            if j != i {
                dfdx += g * checked_coth(x[i] - x[j])?;
            }
            dfdx -= g * checked_coth(x[i] - y[j])?;
        }
        defect = defect.max((s.p()[i] - dfdx).norm());

        // ∂F/∂y_i = γΣ_{j≠i}coth(γy_ij) − γΣ_j coth(γ(y_i−x_j)) + μ
        let mut dfdy = pair.mu;
        for j in 0..n {
            if j != i {
                dfdy += g * checked_coth(y[i] - y[j])?;
            }
            dfdy -= g * checked_coth(y[i] - x[j])?;
        }
        defect = defect.max((pair.target_p[i] + dfdy).norm());
    }
    Ok(defect)
}

/// Numerically evaluated actions of the first four Schur operators on the
/// positions: h₁x = −1, h₂x = p (by definition of the momenta),
/// h₃x = ⅓∂_{t₃}x, h₄x = ¼∂_{t₄}x + ⅛ẍ.
#[derive(Debug, Clone)]
pub struct SchurTable {
    pub h1: Vec<Complex64>,
    pub h2: Vec<Complex64>,
    pub h3: Vec<Complex64>,
    pub h4: Vec<Complex64>,
}

impl SchurTable {
    pub fn evaluate(s: &PhaseState) -> Self {
        let n = s.n();
        let third = cm::grad_p(s, 3);
        let fourth = cm::grad_p(s, 4);
        let acc = cm::acceleration(s);
        SchurTable {
            h1: vec![cx(-1.0, 0.0); n],
            h2: s.p().to_vec(),
            h3: (0..n).map(|i| third[i] / 3.0).collect(),
            h4: (0..n).map(|i| fourth[i] / 4.0 + acc[i] / 8.0).collect(),
        }
    }
}

/// max_i |y_solved − y_series(K)| where the series is the large-μ expansion
/// of the map branch, y = x + μ⁻¹ − μ⁻²p − μ⁻³·⅓∂_{t₃}x
/// + μ⁻⁴(−¼∂_{t₄}x + ⅛ẍ) + …; expected O(|μ|^{−(K+1)}).
pub fn expansion_defect(s: &PhaseState, mu: Complex64, k: u32) -> Result<f64> {
    if !(1..=4).contains(&k) {
        return Err(Error::invalid("expansion_defect: order must be 1..=4"));
    }
    let pair = transform(s, mu)?;
    let n = s.n();
    let third = cm::grad_p(s, 3);
    let fourth = cm::grad_p(s, 4);
    let acc = cm::acceleration(s);
    let inv = cx(1.0, 0.0) / mu;
    let mut defect = 0.0f64;
    for i in 0..n {
        // reflected-sign Schur actions: the expansion of the inverse shift
        let coeffs = [
            cx(1.0, 0.0),
            -s.p()[i],
            -third[i] / 3.0,
            -fourth[i] / 4.0 + acc[i] / 8.0,
        ];
        let mut y_series = s.x()[i];
        let mut p = inv;
        for c in coeffs.iter().take(k as usize) {
            y_series += c * p;
            p *= inv;
        }
        defect = defect.max((pair.target_y[i] - y_series).norm());
    }
    Ok(defect)
}

/// Defect of the subtracted generating identity at the forward/backward
/// image pair, together with its magnitude scale:
/// Σ_k coth(γ(x_i−y_k)) + Σ_k coth(γ(x_i−z_k)) − 2Σ_{k≠i} coth(γ(x_i−x_k)).
pub fn subtracted_identity_defect(s: &PhaseState, mu: Complex64) -> Result<(f64, f64)> {
    let g = s.gamma();
    let y = transform(s, mu)?.target_y;
    let z = backward_positions(s, mu)?;
    let n = s.n();
    let mut defect = 0.0f64;
    let mut scale = 1.0f64;
    for i in 0..n {
        let mut acc = Complex64::ZERO;
        let mut mag = 0.0f64;
        for k in 0..n {
            let a = coth(g * (s.x()[i] - y[k]));
            let b = coth(g * (s.x()[i] - z[k]));
            acc += a + b;
            mag += a.norm() + b.norm();
            if k != i {
                let c = coth(g * (s.x()[i] - s.x()[k]));
                acc -= 2.0 * c;
                mag += 2.0 * c.norm();
            }
        }
        defect = defect.max(acc.norm());
        scale = scale.max(mag);
    }
    Ok((defect, scale))
}

/// Deviations of the two closed-form flow equations from the trace-gradient
/// route: (|t₃ formula − ∂ℋ₃/∂p|_∞, |t₄ formula − ∂ℋ₄/∂p|_∞) with
/// ∂_{t₃}x_i = −3p_i² − 3Σ_{j≠i}c'(x_ij) − γ² and
/// ∂_{t₄}x_i = 4p_i³ + 4Σ_{j≠i}(2p_i + p_j)c'(x_ij) + 4γ²p_i.
pub fn explicit_flow_defect(s: &PhaseState) -> (f64, f64) {
    let g = s.gamma();
    let g2 = g * g;
    let n = s.n();
    let p = s.p();
    let grad3 = cm::grad_p(s, 3);
    let grad4 = cm::grad_p(s, 4);
    let mut d3 = 0.0f64;
    let mut d4 = 0.0f64;
    for i in 0..n {
        let mut c_sum = Complex64::ZERO;
        let mut weighted = Complex64::ZERO;
        for j in 0..n {
            if j != i {
                let c = pair_kernel_deriv(g, s.x()[i] - s.x()[j]);
                c_sum += c;
                weighted += (2.0 * p[i] + p[j]) * c;
            }
        }
        let t3 = -3.0 * p[i] * p[i] - 3.0 * c_sum - g2;
        let t4 = 4.0 * p[i] * p[i] * p[i] + 4.0 * weighted + 4.0 * g2 * p[i];
        d3 = d3.max((t3 - grad3[i]).norm());
        d4 = d4.max((t4 - grad4[i]).norm());
    }
    (d3, d4)
}
