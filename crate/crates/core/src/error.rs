use thiserror::Error;

/// Errors raised across the estimation pipeline.
///
/// The variants are grouped the way the command-line tool maps them onto exit
/// codes: everything except [`Error::NonConvergence`] and [`Error::Numeric`]
/// is an input or validation problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [0, {tau}]")]
    Domain { what: &'static str, value: f64, tau: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid input: {0}")]
    Usage(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("condition {label} violated: {message}")]
    Condition { label: &'static str, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension { expected: usize, got: usize, context: &'static str },

    #[error("data error at row {row}: {message}")]
    Row { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures of numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::NonConvergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
