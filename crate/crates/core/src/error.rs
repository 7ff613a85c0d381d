use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Newton iteration hit its iteration cap. Carries the last iterate so
    /// callers can shrink the continuation step and retry.
    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    /// The Jacobian was numerically singular: branch end or bifurcation point.
    #[error("singular jacobian (pivot ratio {pivot_ratio:.3e})")]
    SingularJacobian { pivot_ratio: f64 },

    /// Continuation could not produce a new point even at the smallest step.
    #[error("branch terminated: {0}")]
    BranchTerminated(String),

    /// The small-amplitude expansion hit another mode with the same linear speed.
    #[error("resonant mode l={mode}: |alpha(kappa_l) - c0| = {gap:.3e}")]
    ResonantMode { mode: usize, gap: f64 },

    #[error("solution blew up at t={time} (max |u| = {max_abs:.3e})")]
    BlowUp { time: f64, max_abs: f64 },

    #[error("insufficient data: {usable} usable coefficients, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no exact solution registered for {0}")]
    NoExactSolution(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
