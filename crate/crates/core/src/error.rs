use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown schedule family `{0}`")]
    UnknownSchedule(String),

    #[error("schedule family `{family}` does not support derivative order {order}")]
    UnsupportedDerivative { family: String, order: usize },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("target tracking lost at tau={tau}: best overlap {overlap:.3e} < 1/sqrt(2)")]
    TrackingLost { tau: f64, overlap: f64 },

    #[error("degenerate target at tau={tau}: gap {gap:.3e}")]
    DegenerateTarget { tau: f64, gap: f64 },

    #[error("grid too coarse at tau={tau}: consecutive overlap {overlap:.3e}")]
    GridTooCoarse { tau: f64, overlap: f64 },

    #[error("spectral gap closes at tau={tau} (gap {gap:.3e})")]
    GapClosed { tau: f64, gap: f64 },

    #[error("expansion order {order} unreachable on this grid: differentiation noise {noise:.3e} exceeds {limit:.3e}")]
    OrderUnreachable { order: usize, noise: f64, limit: f64 },

    #[error("step size underflow at tau={tau} (h={h:.3e})")]
    StepUnderflow { tau: f64, h: f64 },

    #[error("tolerance unreachable within {max_steps} steps (reached tau={tau})")]
    MaxSteps { max_steps: usize, tau: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidInput(_)
                | Error::UnknownSchedule(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
