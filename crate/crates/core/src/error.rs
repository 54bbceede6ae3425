use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("domain error: {0}")]
    Domain(String),

    /// A moment-equation denominator vanished: the watermark carries no
    /// usable signal for the requested statistic.
    #[error("degenerate statistics: {0}")]
    DegenerateDenominator(String),

    /// Binary pivotal statistics (green-red list) do not identify the
    /// watermark proportion.
    #[error("watermark proportion is not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("fixed-point solver did not converge after {evaluations} evaluations (best eps {best}, residual {residual:e})")]
    Convergence {
        best: f64,
        residual: f64,
        evaluations: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyDataset | Error::Domain(_) | Error::Parse { .. } => 2,
            Error::DegenerateDenominator(_)
            | Error::NonIdentifiable(_)
            | Error::Convergence { .. } => 3,
            Error::Io(_) => 4,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateDenominator(msg.into())
    }
}
