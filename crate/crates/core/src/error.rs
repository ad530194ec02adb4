use thiserror::Error;

use crate::torus::DiscreteLoop;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ambiguous lift at sample {index}: step ({d1:.4}, {d2:.4}) exceeds half a period")]
    AmbiguousLift { index: usize, d1: f64, d2: f64 },

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("not a Tonelli Lagrangian: {0}")]
    NotTonelli(String),

    #[error("inconsistent derivatives: max mismatch {mismatch:.3e} in {what}")]
    InconsistentDerivatives { what: String, mismatch: f64 },

    #[error("ill-conditioned fiber Hessian (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("no convergence in {what} after {iterations} iterations (residual {residual:.3e})")]
    Convergence { what: String, iterations: usize, residual: f64 },

    /// Loop minimization stalled; the best iterate is kept for inspection.
    #[error("loop minimization did not converge (gradient norm {grad_norm:.3e}, action {action:.10})")]
    LoopConvergence {
        best: Box<DiscreteLoop>,
        action: f64,
        grad_norm: f64,
    },

    #[error("no interior minimum over the period: {0}")]
    NoInteriorMinimum(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),

    #[error("energy {energy} is not above the critical value {critical} (+ margin {margin})")]
    BelowCritical { energy: f64, critical: f64, margin: f64 },

    #[error("bracketing failure: {message}")]
    Bracketing { message: String, samples: Vec<(f64, f64)> },

    #[error("orbit refinement failed: {message} (last residual {residual:.3e})")]
    Refinement { message: String, residual: f64 },

    #[error("degenerate orbit: {0}")]
    DegenerateOrbit(String),

    #[error("operation inapplicable: {0}")]
    Inapplicable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
