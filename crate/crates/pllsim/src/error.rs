use num_complex::Complex64;

/// Errors produced by construction, analysis and simulation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A value violates a validation rule (NaN, infinity, out of range).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A transfer function was evaluated at (or numerically too close to) a pole.
    #[error("transfer function evaluated at or near a pole (s = {s} rad/s)")]
    PoleEvaluation { s: Complex64 },

    /// The bilinear transform produced unstable discrete poles for a stable
    /// continuous system. Cannot happen for a well-formed input; kept as a
    /// checked error rather than an assert.
    #[error("discretization at dt = {dt:e} s produced unstable discrete poles for a stable system")]
    Discretization { dt: f64 },

    /// Simulation setup is inconsistent (e.g. full-wave time step too coarse
    /// for the output carrier).
    #[error("configuration error: {0}")]
    Config(String),

    /// The loop state left the representable range mid-run.
    #[error("simulation diverged: {0}")]
    Diverged(String),

    /// The caller requested cancellation between steps.
    #[error("simulation cancelled")]
    Cancelled,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {value}")))
    }
}
