//! Seeded generation of regular phase states for verification ensembles.
//!
//! A SplitMix64 generator keeps ensembles bit-reproducible across runs and
//! platforms, which the CLI determinism contract relies on.

use crate::cm::PhaseState;
use crate::{cx, Complex64, Error, Result};

/// SplitMix64: tiny, seedable, deterministic.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn complex_in_box(&mut self, re_halfwidth: f64, im_halfwidth: f64) -> Complex64 {
        cx(
            self.uniform(-re_halfwidth, re_halfwidth),
            self.uniform(-im_halfwidth, im_halfwidth),
        )
    }

    /// Draw a regular state: positions uniform in a box (whole draw
    /// resampled until the pairwise guard holds with margin), momenta
    /// uniform.
    pub fn state(&mut self, n: usize, gamma: Complex64, opts: &StateOptions) -> Result<PhaseState> {
        for _ in 0..200 {
            let x: Vec<Complex64> = (0..n)
                .map(|i| {
                    let center = opts.spread * (i as f64 - 0.5 * (n as f64 - 1.0));
                    cx(center, 0.0) + self.complex_in_box(opts.re_halfwidth, opts.im_halfwidth)
                })
                .collect();
            let p: Vec<Complex64> = (0..n)
                .map(|_| self.complex_in_box(opts.p_re, opts.p_im))
                .collect();
            let min = x
                .iter()
                .enumerate()
                .flat_map(|(i, &xi)| {
                    x.iter()
                        .skip(i + 1)
                        .map(move |&xj| (gamma * (xi - xj)).sinh().norm())
                })
                .fold(f64::INFINITY, f64::min);
            if min >= opts.min_sinh {
                return PhaseState::new(gamma, x, p);
            }
        }
        Err(Error::invalid(
            "could not draw a regular state within the resampling budget",
        ))
    }
}

/// Shape of the sampling box.
#[derive(Debug, Clone)]
pub struct StateOptions {
    /// spacing of the per-particle box centers along the real axis
    pub spread: f64,
    pub re_halfwidth: f64,
    pub im_halfwidth: f64,
    pub p_re: f64,
    pub p_im: f64,
    /// resample until min |sinh(γ·Δx)| reaches this margin
    pub min_sinh: f64,
}

impl StateOptions {
    /// For algebraic identities: moderate separation, generic momenta.
    pub fn algebraic() -> Self {
        StateOptions {
            spread: 0.9,
            re_halfwidth: 0.25,
            im_halfwidth: 0.25,
            p_re: 1.0,
            p_im: 0.5,
            min_sinh: 0.05,
        }
    }

    /// For integrated flows: wide separation and small momenta so
    /// trajectories stay regular over the integration window.
    pub fn flow() -> Self {
        StateOptions {
            spread: 1.3,
            re_halfwidth: 0.15,
            im_halfwidth: 0.1,
            p_re: 0.25,
            p_im: 0.1,
            min_sinh: 0.6,
        }
    }
}
