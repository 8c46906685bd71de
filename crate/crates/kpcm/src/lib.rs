//! Trigonometric Calogero-Moser hierarchy and trigonometric KP tau-functions.
//!
//! The crate has two halves that are verified against each other at desk
//! scale (N ≤ 8, double precision):
//!
//! * the many-body side ([`cm`], [`flows`], [`backlund`]): Lax matrix,
//!   hierarchy Hamiltonians ℋ_m, their gradients, Hamiltonian flow
//!   integration and the parameter-dependent Bäcklund map;
//! * the tau-function side ([`kp`]): the determinant tau-function built from
//!   initial data, pole extraction, tau shifts, the bilinear identity, wave
//!   coefficients and residue/contour identities.
//!
//! Everything sits on a small self-contained dense complex linear algebra
//! layer ([`linalg`]). [`checks`] packages the verification suites behind
//! stable names so the CLI and the acceptance tests run the same code.
//!
//! ```
//! use kpcm::{cx, cm::PhaseState, flows, kp};
//!
//! let state = PhaseState::new(
//!     cx(1.0, 0.0), // coupling γ; imaginary values give the trigonometric family
//!     vec![cx(-0.8, 0.0), cx(0.9, 0.1)],
//!     vec![cx(0.2, 0.0), cx(-0.2, 0.0)],
//! )?;
//!
//! // integrate the second hierarchy flow…
//! let times = flows::HierarchyTimes::from_pairs([(2, 0.4)])?;
//! let evolved = flows::evolve_multi(&state, &times, 1e-10)?;
//!
//! // …and recover the same pole positions from the determinant tau-function
//! let fm = kp::FlowMatrixSet::new(&state, 8);
//! let poles = kp::poles_at(&fm, &times)?;
//! assert!((poles[0] - evolved.x()[0]).norm() < 1e-7);
//! # Ok::<(), kpcm::Error>(())
//! ```

pub mod backlund;
pub mod checks;
pub mod cm;
pub mod ensemble;
pub mod error;
pub mod flows;
pub mod kp;
pub mod linalg;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand complex constructor used throughout the crate and its tests.
#[inline]
pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
