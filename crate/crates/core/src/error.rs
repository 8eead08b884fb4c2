use std::path::PathBuf;

/// Errors raised by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar or field solver did not reach its tolerance.
    #[error("solver did not converge for input {input}: residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        input: f64,
        residual: f64,
        iterations: usize,
    },

    /// An argument lies outside the domain of the evaluated function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates a documented range.
    #[error("parameter error: {0}")]
    Param(String),

    /// Two fields defined on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A homogeneous negative-order norm was requested for a field with a mean.
    #[error("zero Fourier mode {mean_norm:e} exceeds tolerance {tolerance:e}; homogeneous norm of order {order} undefined")]
    ZeroMode {
        order: f64,
        mean_norm: f64,
        tolerance: f64,
    },

    /// The noise weights fail the trace-class tail criterion.
    #[error("noise weights not summable: {0}")]
    Summability(String),

    /// A time step produced non-finite values.
    #[error("step {step} at t = {time}: field became non-finite")]
    Stability { step: usize, time: f64 },

    /// A pointwise evaluation failed at a grid index.
    #[error("pointwise evaluation failed at grid index {index}: {source}")]
    Pointwise {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Weak-form residuals were requested for a mode the trajectory did not track.
    #[error("replay data unavailable: {0}")]
    Replay(String),

    /// A run configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An expected artifact is missing from a run directory.
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    /// Snapshot or artifact data could not be decoded.
    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors that signal invalid input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Param(_)
                | Error::Domain(_)
                | Error::Config(_)
                | Error::Summability(_)
                | Error::GridMismatch(_)
        )
    }
}
