use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("gradient descent did not converge after {iters} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iters: usize, grad_norm: f64 },

    #[error("strong convexity required (lambda = {0})")]
    StrongConvexityRequired(f64),

    #[error("learning rate {eta} exceeds 2 / max phi = {limit} (max phi = {max_phi})")]
    LearningRateTooLarge { eta: f64, max_phi: f64, limit: f64 },

    #[error("stability bound overflows ({0})")]
    BoundOverflow(String),

    #[error("p=1 degenerate: bagging bound needs n >= 2 (got n = {0})")]
    DegenerateBagging(usize),

    #[error("degenerate beta: dimension must be at least 2 (got {0})")]
    DegenerateBeta(usize),

    #[error("{0} is not supported")]
    Unsupported(String),

    #[error("empty fold: {0}")]
    EmptyFold(String),

    #[error("missing values in rows {rows:?}")]
    MissingValues { rows: Vec<usize> },

    #[error("zero variance in column '{0}'")]
    ZeroVariance(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("responses required")]
    MissingResponses,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the
    /// inputs (non-convergence, overflowing bounds, ill-conditioned kernels).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::BoundOverflow(_)
                | Error::StrongConvexityRequired(_)
                | Error::LearningRateTooLarge { .. }
        )
    }

    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::MissingValues { .. }
                | Error::ZeroVariance(_)
                | Error::Data(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::EmptyFold(_)
                | Error::MissingResponses
        )
    }
}
