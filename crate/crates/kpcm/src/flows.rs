//! Hamiltonian flow integration for the hierarchy times.
//!
//! The flows ẋ = ∂ℋ_m/∂p, ṗ = −∂ℋ_m/∂x are complex-analytic and
//! non-separable in (x, p), so a fixed-order RK4 with step-doubling error
//! control is used and accuracy is enforced by conservation monitoring
//! rather than structure preservation.

use crate::cm::{self, PhaseState};
use crate::linalg::ComplexVector;
use crate::{Complex64, Error, Result};
use std::collections::BTreeMap;

/// Hard cap on the number of distinct hierarchical times handled at once.
pub const MAX_TIMES: usize = 8;

const STEP_FLOOR: f64 = 1e-12;

/// Finite assignment of real values to hierarchical times t_m.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HierarchyTimes {
    entries: BTreeMap<u32, f64>,
}

impl HierarchyTimes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut t = Self::new();
        for (m, v) in pairs {
            t.insert(m, v)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, m: u32, value: f64) -> Result<()> {
        if m == 0 {
            return Err(Error::invalid("flow index 0 is not part of the hierarchy"));
        }
        if !value.is_finite() {
            return Err(Error::invalid("time values must be finite"));
        }
        if !self.entries.contains_key(&m) && self.entries.len() >= MAX_TIMES {
            return Err(Error::invalid(format!(
                "at most {MAX_TIMES} hierarchical times are supported"
            )));
        }
        self.entries.insert(m, value);
        Ok(())
    }

    pub fn get(&self, m: u32) -> Option<f64> {
        self.entries.get(&m).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Ascending in the flow index.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(&m, &v)| (m, v))
    }
}

/// Time-stamped sequence of phase states from one flow integration; every
/// accepted step is stored so finite-difference consumers get dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub m: u32,
    pub samples: Vec<(f64, PhaseState)>,
}

impl Trajectory {
    pub fn first(&self) -> &PhaseState {
        &self.samples.first().expect("trajectory is never empty").1
    }

    pub fn last(&self) -> &PhaseState {
        &self.samples.last().expect("trajectory is never empty").1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Right-hand side of the m-th flow: (ẋ, ṗ) = (∂ℋ_m/∂p, −∂ℋ_m/∂x).
pub fn flow_derivative(s: &PhaseState, m: u32) -> (ComplexVector, ComplexVector) {
    let dx = cm::grad_p(s, m);
    let dp = cm::grad_x(s, m).scaled(crate::cx(-1.0, 0.0));
    (dx, dp)
}

fn rhs(s0: &PhaseState, y: &[Complex64], m: u32) -> Result<Vec<Complex64>> {
    let n = s0.n();
    let s = s0.with_coords(y[..n].to_vec(), y[n..].to_vec())?;
    let (dx, dp) = flow_derivative(&s, m);
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(dx.as_slice());
    out.extend_from_slice(dp.as_slice());
    Ok(out)
}

fn rk4_step(s0: &PhaseState, y: &[Complex64], m: u32, h: f64) -> Result<Vec<Complex64>> {
    let hc = crate::cx(h, 0.0);
    let k1 = rhs(s0, y, m)?;
    let y2: Vec<Complex64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * hc * b).collect();
    let k2 = rhs(s0, &y2, m)?;
    let y3: Vec<Complex64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * hc * b).collect();
    let k3 = rhs(s0, &y3, m)?;
    let y4: Vec<Complex64> = y.iter().zip(&k3).map(|(a, b)| a + hc * b).collect();
    let k4 = rhs(s0, &y4, m)?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, a)| a + hc / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Integrate the m-th flow from `s0` to `t_end` (either sign) with
/// step-doubling error control targeting `rtol` per unit time.
pub fn integrate(s0: &PhaseState, m: u32, t_end: f64, rtol: f64) -> Result<Trajectory> {
    let (traj, err) = integrate_partial(s0, m, t_end, rtol);
    match err {
        None => Ok(traj),
        Some(e) => Err(e),
    }
}

/// As [`integrate`], but on failure also hands back the trajectory up to
/// the last accepted step, so callers can report where the run died.
pub fn integrate_partial(
    s0: &PhaseState,
    m: u32,
    t_end: f64,
    rtol: f64,
) -> (Trajectory, Option<Error>) {
    let samples = vec![(0.0, s0.clone())];
    let mut traj = Trajectory { m, samples };
    let err = integrate_into(&mut traj, s0, m, t_end, rtol).err();
    (traj, err)
}

fn integrate_into(
    traj: &mut Trajectory,
    s0: &PhaseState,
    m: u32,
    t_end: f64,
    rtol: f64,
) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("flow index must be at least 1"));
    }
    if !(1e-13..=1e-6).contains(&rtol) {
        return Err(Error::invalid("rtol must lie in [1e-13, 1e-6]"));
    }
    if !t_end.is_finite() {
        return Err(Error::invalid("t_end must be finite"));
    }

    let n = s0.n();
    let samples = &mut traj.samples;
    if t_end == 0.0 {
        return Ok(());
    }

    let dir = t_end.signum();
    let mut t = 0.0f64;
    let mut y: Vec<Complex64> = s0.x().iter().chain(s0.p().iter()).copied().collect();
    let mut h = dir * t_end.abs().min(0.05);

    while (t_end - t) * dir > 0.0 {
        // a remainder below the step floor is inside the resolution of the
        // controller: the endpoint has been reached within one step
        if (t_end - t).abs() < STEP_FLOOR * t_end.abs().max(1.0) {
            if let Some(last) = samples.last_mut() {
                last.0 = t_end;
            }
            break;
        }
        let mut final_step = false;
        if (t + h - t_end) * dir >= 0.0 {
            h = t_end - t;
            final_step = true;
        }
        if h.abs() < STEP_FLOOR {
            return Err(Error::StepUnderflow { t, h });
        }

        let big = rk4_step(s0, &y, m, h)?;
        let half = rk4_step(s0, &y, m, 0.5 * h)?;
        let two = rk4_step(s0, &half, m, 0.5 * h)?;

        let err = two
            .iter()
            .zip(&big)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / 15.0;
        // the doubled-step estimate cannot resolve differences below the
        // rounding floor; without this term a sharp transient drives h into
        // a rejection spiral on pure noise
        let noise_floor = 32.0 * f64::EPSILON * inf_norm(&y).max(1.0);
        let tol = (rtol * h.abs() * inf_norm(&y).max(1.0)).max(noise_floor);

        if err <= tol {
            // accept, with local extrapolation
            y = two
                .iter()
                .zip(&big)
                .map(|(a, b)| a + (a - b) / 15.0)
                .collect();
            // a clamped step lands exactly on t_end, avoiding a sub-floor
            // rounding remainder
            t = if final_step { t_end } else { t + h };
            let state = s0.with_coords(y[..n].to_vec(), y[n..].to_vec())?;
            samples.push((t, state));
            if t == t_end {
                break;
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.25)).clamp(0.2, 5.0)
        };
        h *= factor;
    }

    Ok(())
}

/// Apply `integrate` sequentially for each (m, t_m), ascending in m. The
/// flows are in involution, so the composition order is immaterial up to
/// integration error (tested, not assumed silently).
pub fn evolve_multi(s0: &PhaseState, times: &HierarchyTimes, rtol: f64) -> Result<PhaseState> {
    let mut state = s0.clone();
    for (m, t) in times.iter() {
        if t == 0.0 {
            continue;
        }
        state = integrate(&state, m, t, rtol)?.last().clone();
    }
    Ok(state)
}

/// Max over k ≤ k_max and samples of |H_k(sample) − H_k(first)|.
pub fn conserved_drift(traj: &Trajectory, k_max: u32) -> f64 {
    let first = traj.first();
    let reference: Vec<Complex64> = (1..=k_max)
        .map(|k| cm::hamiltonian_trace(first, k))
        .collect();
    let mut drift = 0.0f64;
    for (_, s) in traj.samples.iter().skip(1) {
        for (k, r) in (1..=k_max).zip(&reference) {
            drift = drift.max((cm::hamiltonian_trace(s, k) - r).norm());
        }
    }
    drift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cm::acceleration;
    use crate::ensemble::{Rng, StateOptions};
    use crate::{cx, Complex64};

    fn single(gamma: f64, x: f64, p: f64) -> PhaseState {
        PhaseState::new(cx(gamma, 0.0), vec![cx(x, 0.0)], vec![cx(p, 0.0)]).unwrap()
    }

    #[test]
    fn times_validation() {
        let mut t = HierarchyTimes::new();
        assert!(t.insert(0, 1.0).is_err());
        for m in 1..=8 {
            t.insert(m, 0.1).unwrap();
        }
        assert!(t.insert(9, 0.1).is_err());
        t.insert(3, 0.5).unwrap(); // overwrite stays within the cap
        assert_eq!(t.get(3), Some(0.5));
    }

    #[test]
    fn derivative_examples() {
        let mut rng = Rng::new(2);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::algebraic()).unwrap();
        let (dx, dp) = flow_derivative(&s, 1);
        for i in 0..3 {
            assert!((dx[i] - cx(-1.0, 0.0)).norm() < 1e-12);
            assert!(dp[i].norm() < 1e-12);
        }

        let s = single(1.0, 0.0, 0.5);
        let (dx, dp) = flow_derivative(&s, 2);
        assert!((dx[0] - cx(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(dp[0], Complex64::ZERO);

        let s = single(1.0, 0.0, 1.0);
        let (dx, _) = flow_derivative(&s, 3);
        assert!((dx[0] - cx(-4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn free_particle_is_exact() {
        let s = single(1.0, 0.2, 0.3);
        let traj = integrate(&s, 2, 1.0, 1e-10).unwrap();
        let xf = traj.last().x()[0];
        assert!((xf - cx(0.8, 0.0)).norm() < 1e-13);
        assert!((traj.last().p()[0] - cx(0.3, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn constant_drift_flow() {
        // single particle at rest under the third flow: dx/dt = −γ²
        let s = single(1.0, 0.0, 0.0);
        let traj = integrate(&s, 3, 0.1, 1e-10).unwrap();
        assert!((traj.last().x()[0] - cx(-0.1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn center_of_mass_is_conserved() {
        let s = PhaseState::new(
            cx(1.0, 0.0),
            vec![cx(-0.8, 0.0), cx(0.8, 0.0)],
            vec![cx(-0.2, 0.0), cx(0.2, 0.0)],
        )
        .unwrap();
        let traj = integrate(&s, 2, 1.0, 1e-10).unwrap();
        for (_, state) in &traj.samples {
            let com = state.x()[0] + state.x()[1];
            assert!(com.norm() <= 1e-10);
        }
    }

    #[test]
    fn drift_stays_small() {
        let mut rng = Rng::new(8);
        let s = rng.state(2, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let traj = integrate(&s, 2, 1.0, 1e-10).unwrap();
        let scale = (1..=2)
            .map(|k| cm::hamiltonian_trace(&s, k).norm())
            .fold(1.0_f64, f64::max);
        assert!(conserved_drift(&traj, 2) <= 1e-8 * scale);

        let s3 = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let traj3 = integrate(&s3, 3, 0.5, 1e-10).unwrap();
        let scale3 = (1..=3)
            .map(|k| cm::hamiltonian_trace(&s3, k).norm())
            .fold(1.0_f64, f64::max);
        assert!(conserved_drift(&traj3, 3) <= 1e-8 * scale3);

        // single-sample trajectory has zero drift by definition
        let t0 = integrate(&s, 2, 0.0, 1e-10).unwrap();
        assert_eq!(t0.len(), 1);
        assert_eq!(conserved_drift(&t0, 2), 0.0);
    }

    #[test]
    fn multi_time_shift_and_empty() {
        let mut rng = Rng::new(12);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let same = evolve_multi(&s, &HierarchyTimes::new(), 1e-10).unwrap();
        assert_eq!(same.x(), s.x());

        let t = HierarchyTimes::from_pairs([(1, 0.3)]).unwrap();
        let shifted = evolve_multi(&s, &t, 1e-10).unwrap();
        for i in 0..3 {
            assert!((shifted.x()[i] - (s.x()[i] - cx(0.3, 0.0))).norm() < 1e-11);
            assert!((shifted.p()[i] - s.p()[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn flows_commute() {
        let mut rng = Rng::new(15);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let ab = integrate(integrate(&s, 2, 0.1, 1e-11).unwrap().last(), 3, 0.05, 1e-11)
            .unwrap()
            .last()
            .clone();
        let ba = integrate(integrate(&s, 3, 0.05, 1e-11).unwrap().last(), 2, 0.1, 1e-11)
            .unwrap()
            .last()
            .clone();
        for i in 0..3 {
            assert!((ab.x()[i] - ba.x()[i]).norm() < 1e-7);
            assert!((ab.p()[i] - ba.p()[i]).norm() < 1e-7);
        }
    }

    #[test]
    fn time_reversal_returns_home() {
        let mut rng = Rng::new(21);
        let s = rng.state(3, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let rtol = 1e-10;
        let fwd = integrate(&s, 2, 0.6, rtol).unwrap().last().clone();
        let back = integrate(&fwd, 2, -0.6, rtol).unwrap().last().clone();
        let scale = s.x().iter().map(|c| c.norm()).fold(1.0, f64::max);
        for i in 0..3 {
            assert!((back.x()[i] - s.x()[i]).norm() <= 10.0 * rtol * scale);
            assert!((back.p()[i] - s.p()[i]).norm() <= 10.0 * rtol * scale);
        }
    }

    #[test]
    fn second_difference_matches_acceleration() {
        let mut rng = Rng::new(27);
        let s = rng.state(2, cx(1.0, 0.0), &StateOptions::flow()).unwrap();
        let h = 1e-3;
        let tstar = 0.2;
        let at = |t: f64| integrate(&s, 2, t, 1e-12).unwrap().last().clone();
        let (sm, s0, sp) = (at(tstar - h), at(tstar), at(tstar + h));
        let acc = acceleration(&s0);
        for i in 0..2 {
            let fd = (sp.x()[i] - 2.0 * s0.x()[i] + sm.x()[i]) / cx(h * h, 0.0);
            assert!(
                (fd - acc[i]).norm() <= 1e-5 * acc.inf_norm().max(1.0),
                "i={i} fd={fd} acc={}",
                acc[i]
            );
        }
    }

    #[test]
    fn head_on_collision_is_detected() {
        let s = PhaseState::new(
            cx(1.0, 0.0),
            vec![cx(-0.3, 0.0), cx(0.3, 0.0)],
            vec![Complex64::ZERO; 2],
        )
        .unwrap();
        let err = integrate(&s, 2, 2.0, 1e-10).unwrap_err();
        assert!(err.is_runtime_singularity(), "got {err:?}");
    }
}
