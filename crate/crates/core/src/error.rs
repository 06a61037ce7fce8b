use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Variants are grouped by [`ErrorKind`], which front ends map onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("tolerance error: {0}")]
    Tolerance(String),
    #[error("not quantized: {0}")]
    NotQuantized(String),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("degenerate slice: {0}")]
    DegenerateSlice(String),
    #[error("level {0} hits a node value; choose another level")]
    IrregularLevel(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("inconsistent: {0}")]
    Inconsistent(String),
    #[error("field not liftable: {message}")]
    NotLiftable {
        message: String,
        /// Worst loop residuals as (node a, node b, residual).
        worst: Vec<(usize, usize, f64)>,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification of [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// File system or file format problems.
    Io,
    /// The input violates an operation's contract.
    Contract,
    /// A numerical tolerance could not be met.
    Tolerance,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Format(_) => ErrorKind::Io,
            Error::Tolerance(_) | Error::NotQuantized(_) => ErrorKind::Tolerance,
            _ => ErrorKind::Contract,
        }
    }

    /// Stable snake_case identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Data(_) => "data",
            Error::Geometry(_) => "geometry",
            Error::Tolerance(_) => "tolerance",
            Error::NotQuantized(_) => "not_quantized",
            Error::Aliasing(_) => "aliasing",
            Error::DegenerateSlice(_) => "degenerate_slice",
            Error::IrregularLevel(_) => "irregular_level",
            Error::Precondition(_) => "precondition",
            Error::OutOfRange(_) => "out_of_range",
            Error::Inconsistent(_) => "inconsistent",
            Error::NotLiftable { .. } => "not_liftable",
            Error::Internal(_) => "internal",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
