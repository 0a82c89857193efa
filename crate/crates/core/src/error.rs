use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
///
/// The variants are grouped the way the command-line front end maps them to
/// exit codes: parameter problems, data problems and solver problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ragged input at line {line}: expected {expected} values, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("empty matrix")]
    Empty,

    #[error("column {0} has zero norm and cannot be normalized")]
    ZeroColumn(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// True for errors caused by the input data rather than by parameters or
    /// numerical breakdown.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Ragged { .. }
                | Error::NonFinite { .. }
                | Error::Empty
                | Error::ZeroColumn(_)
                | Error::Shape(_)
                | Error::InvalidLabels(_)
        )
    }

    pub fn is_solver_error(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::NoConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
