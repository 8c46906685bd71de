//! Browser bindings for three interactive views: pole trajectories in the
//! complex plane, the field u(x,t) carried by the determinant
//! tau-function, and the Bäcklund image of a random state as μ moves.
//!
//! Each export returns a JSON payload; the static page in `www/` draws it
//! on a canvas. Build with
//! `wasm-pack build crates/kpcm-wasm --target web` (or `cargo build
//! --target wasm32-unknown-unknown` plus `wasm-bindgen`).

use kpcm::backlund;
use kpcm::cm::PhaseState;
use kpcm::ensemble::{Rng, StateOptions};
use kpcm::flows::{self, HierarchyTimes};
use kpcm::kp::{self, FlowMatrixSet};
use kpcm::{cx, Complex64};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

fn demo_state(n: usize, gamma: Complex64, seed: u64) -> kpcm::Result<PhaseState> {
    Rng::new(seed).state(n.clamp(1, 8), gamma, &StateOptions::flow())
}

#[derive(Serialize)]
struct TrajectoryPayload {
    times: Vec<f64>,
    /// poles[sample][particle] = [re, im]
    poles: Vec<Vec<[f64; 2]>>,
    drift: Vec<f64>,
}

fn trajectory_payload(
    n: usize,
    gamma: Complex64,
    seed: u64,
    m: u32,
    t_end: f64,
) -> kpcm::Result<String> {
    let s0 = demo_state(n, gamma, seed)?;
    let traj = flows::integrate(&s0, m, t_end, 1e-9)?;
    let stride = (traj.samples.len() / 400).max(1);
    let mut times = Vec::new();
    let mut poles = Vec::new();
    let mut drift = Vec::new();
    let h0: Vec<Complex64> = (1..=s0.n() as u32)
        .map(|k| kpcm::cm::hamiltonian_trace(&s0, k))
        .collect();
    for (idx, (t, state)) in traj.samples.iter().enumerate() {
        if idx % stride != 0 && idx != traj.samples.len() - 1 {
            continue;
        }
        times.push(*t);
        poles.push(state.x().iter().map(|&c| pair(c)).collect());
        let d = h0
            .iter()
            .enumerate()
            .map(|(k, h)| (kpcm::cm::hamiltonian_trace(state, k as u32 + 1) - h).norm())
            .fold(0.0f64, f64::max);
        drift.push(d);
    }
    serde_json::to_string(&TrajectoryPayload { times, poles, drift })
        .map_err(|e| kpcm::Error::InvalidInput(e.to_string()))
}

/// Integrate one hierarchy flow of a seeded random state and return the
/// sampled pole paths plus conserved-quantity drift.
#[wasm_bindgen]
pub fn flow_trajectory(
    n: usize,
    gamma_re: f64,
    gamma_im: f64,
    seed: u64,
    m: u32,
    t_end: f64,
) -> Result<String, JsValue> {
    trajectory_payload(n, cx(gamma_re, gamma_im), seed, m, t_end)
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[derive(Serialize)]
struct ProfilePayload {
    x: Vec<f64>,
    u_re: Vec<f64>,
    u_im: Vec<f64>,
    poles: Vec<[f64; 2]>,
    /// max |determinant-route pole − integrated pole|
    route_deviation: f64,
}

#[allow(clippy::too_many_arguments)]
fn profile_payload(
    n: usize,
    gamma: Complex64,
    seed: u64,
    m: u32,
    t: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> kpcm::Result<String> {
    let s0 = demo_state(n, gamma, seed)?;
    let fm = FlowMatrixSet::new(&s0, 8);
    let times = HierarchyTimes::from_pairs([(m, t)])?;
    let poles = kp::poles_at(&fm, &times)?;

    let integrated = if t == 0.0 {
        s0.clone()
    } else {
        flows::integrate(&s0, m, t, 1e-9)?.last().clone()
    };
    let mut route_deviation = 0.0f64;
    for i in 0..s0.n() {
        route_deviation = route_deviation.max((poles[i] - integrated.x()[i]).norm());
    }

    let count = points.clamp(16, 2048);
    let mut xs = Vec::with_capacity(count);
    let mut u_re = Vec::with_capacity(count);
    let mut u_im = Vec::with_capacity(count);
    for k in 0..count {
        let x = x_min + (x_max - x_min) * k as f64 / (count - 1) as f64;
        // nudge off the real axis keeps the curve finite through poles
        let xq = cx(x, 0.04);
        let u = kp::u_eval_at_poles(gamma, poles.as_slice(), xq)?;
        xs.push(x);
        u_re.push(u.re);
        u_im.push(u.im);
    }
    serde_json::to_string(&ProfilePayload {
        x: xs,
        u_re,
        u_im,
        poles: poles.iter().map(|&c| pair(c)).collect(),
        route_deviation,
    })
    .map_err(|e| kpcm::Error::InvalidInput(e.to_string()))
}

/// The field u(x) = −Σ γ²/sinh²(γ(x − x_i(t))) along a real-x window, with
/// the poles taken from the determinant tau-function at hierarchical time
/// t_m = t, cross-checked against the integrated flow.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn field_profile(
    n: usize,
    gamma_re: f64,
    gamma_im: f64,
    seed: u64,
    m: u32,
    t: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<String, JsValue> {
    profile_payload(n, cx(gamma_re, gamma_im), seed, m, t, x_min, x_max, points)
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[derive(Serialize)]
struct BacklundPayload {
    x: Vec<[f64; 2]>,
    y: Vec<[f64; 2]>,
    canonical_defect: f64,
    iterations: u32,
}

fn backlund_payload(n: usize, gamma: Complex64, seed: u64, mu: Complex64) -> kpcm::Result<String> {
    let s = demo_state(n, gamma, seed)?;
    let pair_result = backlund::transform(&s, mu)?;
    let defect = backlund::canonical_defect(&pair_result)?;
    serde_json::to_string(&BacklundPayload {
        x: s.x().iter().map(|&c| pair(c)).collect(),
        y: pair_result.target_y.iter().map(|&c| pair(c)).collect(),
        canonical_defect: defect,
        iterations: pair_result.iterations,
    })
    .map_err(|e| kpcm::Error::InvalidInput(e.to_string()))
}

/// Bäcklund image of a seeded random state at parameter μ.
#[wasm_bindgen]
pub fn backlund_map(
    n: usize,
    gamma_re: f64,
    gamma_im: f64,
    seed: u64,
    mu_re: f64,
    mu_im: f64,
) -> Result<String, JsValue> {
    backlund_payload(n, cx(gamma_re, gamma_im), seed, cx(mu_re, mu_im))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_payload_is_wellformed() {
        let json = trajectory_payload(3, cx(1.0, 0.0), 11, 2, 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let times = v["times"].as_array().unwrap();
        assert!(times.len() >= 2);
        assert_eq!(v["poles"][0].as_array().unwrap().len(), 3);
        assert!(v["drift"]
            .as_array()
            .unwrap()
            .iter()
            .all(|d| d.as_f64().unwrap() < 1e-6));
    }

    #[test]
    fn profile_routes_agree() {
        let json = profile_payload(2, cx(1.0, 0.0), 5, 2, 0.3, -3.0, 3.0, 64).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["route_deviation"].as_f64().unwrap() < 1e-7);
        assert_eq!(v["x"].as_array().unwrap().len(), 64);
    }

    #[test]
    fn backlund_payload_converges() {
        let json = backlund_payload(3, cx(1.0, 0.0), 9, cx(12.0, 0.0)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["canonical_defect"].as_f64().unwrap() < 1e-9);
        assert_eq!(v["y"].as_array().unwrap().len(), 3);
    }
}
