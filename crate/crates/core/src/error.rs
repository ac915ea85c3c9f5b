use thiserror::Error;

/// Errors raised by the identification library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("resolution must be at least 2, got {0}")]
    Resolution(usize),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("coefficient is not symmetric (max |a_ij - a_ji| = {0:.3e})")]
    Asymmetric(f64),

    #[error("coefficient is not elliptic (smallest eigenvalue {0:.3e})")]
    NotElliptic(f64),

    #[error("incompatible norm: {0}")]
    IncompatibleNorm(String),

    #[error("partition incompatible with mesh: {0}")]
    Partition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
