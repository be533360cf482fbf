use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownSubsystem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("undefined DQD mixing: tunnel coupling and detuning are both zero")]
    UndefinedMixing,
    #[error("dispersive approximation invalid: zero detuning")]
    DispersiveInvalid,
    #[error("transmon charge basis not converged: {0}")]
    Convergence(String),
    #[error("eigendecomposition failed: {0}")]
    Diagonalization(String),
    #[error("integrator step too large: trace drifted by {drift:.3e} at t = {time} ns")]
    StepSize { drift: f64, time: f64 },
    #[error("density matrix lost positivity: min eigenvalue {min_eig:.3e} at t = {time} ns")]
    Integrator { min_eig: f64, time: f64 },
    #[error("no avoided crossing in the swept range: {0}")]
    CrossingNotFound(String),
    #[error("fit did not converge: {message} (best residual {best_residual:.4e})")]
    FitDivergence { message: String, best_residual: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config { line, message: message.into() }
    }

    /// True for errors caused by bad input files rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Io(_) | Error::Json(_))
    }
}
