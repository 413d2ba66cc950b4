use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid format: {0}")]
    Format(String),

    #[error("inconsistent data: {0}")]
    Consistency(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Statistics too degenerate to define an efficiency or a relation.
    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    /// A linear relation whose target coefficient is too small to divide by.
    #[error("ill-conditioned relation: {0}")]
    IllConditioned(String),

    #[error("matrix is not symmetric: |C[{row}][{col}] - C[{col}][{row}]| = {diff:e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("eigenvalue {value:e} is negative beyond rounding tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
}

impl Error {
    /// True for errors that stem from the numbers rather than from inputs or IO.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_)
                | Error::IllConditioned(_)
                | Error::Asymmetric { .. }
                | Error::NegativeEigenvalue { .. }
                | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
