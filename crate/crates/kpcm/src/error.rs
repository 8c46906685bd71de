//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A pivot fell below the singularity threshold during an LU solve.
    #[error("singular linear system (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularLinearSystem { pivot: f64, threshold: f64 },

    /// The matrix exponential series did not reach the requested tolerance.
    #[error("matrix exponential series did not converge within {terms} terms")]
    ConvergenceFailure { terms: usize },

    /// The simultaneous root iteration hit its iteration cap.
    #[error("polynomial roots not converged after {iterations} iterations")]
    RootsNotConverged { iterations: usize },

    /// Two particles came within the collision guard: some |sinh(γ·Δx)|
    /// dropped below the configured minimum.
    #[error("pole collision: |sinh(gamma*dx)| = {value:.3e} below guard {guard:.3e}")]
    PoleCollision { value: f64, guard: f64 },

    /// A field evaluation point coincided with a pole of the solution.
    #[error("evaluation point within {value:.3e} of a pole (guard {guard:.3e})")]
    EvaluationAtPole { value: f64, guard: f64 },

    /// Two candidate logarithm branches were equidistant from the
    /// continuation reference; the pole cannot be tracked unambiguously.
    #[error("ambiguous log branch while tracking a pole (candidates within {separation:.3e})")]
    BranchAmbiguity { separation: f64 },

    /// Newton iteration for the Bäcklund system failed to converge.
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: u32, residual: f64 },

    /// The adaptive step controller shrank the step below its floor.
    #[error("integration step underflow at t = {t:.6e} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    /// Invalid argument or state outside an operation's documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for the runtime-singularity family (CLI exit code 3).
    pub fn is_runtime_singularity(&self) -> bool {
        matches!(
            self,
            Error::PoleCollision { .. } | Error::StepUnderflow { .. }
        )
    }
}
