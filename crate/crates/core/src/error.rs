use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("grid mismatch: expected {expected}x{expected}, found {found}x{found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("time step {dt:e} violates the CFL bound; largest admissible step is {max_dt:e}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("density floor {0:e} is below 1e-6; Brinkman penalization would be ill-conditioned")]
    DensityFloorTooSmall(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "{solver} did not converge after {iterations} iterations (relative residual {residual:e})"
    )]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite value in {component}")]
    NonFinite { component: String },

    #[error("missing input: {0}")]
    Missing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }
}
