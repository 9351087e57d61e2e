use std::fmt;
use std::io;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A function argument violated its contract.
    Argument(String),
    /// CSV header does not match the expected schema.
    Schema(String),
    /// A CSV data row is malformed; `line` is 1-based (header is line 1).
    Row { line: usize, msg: String },
    /// The input contained no data rows.
    EmptyDataset,
    /// A feature has zero variance on the training split.
    DegenerateFeature { index: usize },
    /// The SVM solver hit its iteration cap before satisfying the KKT
    /// conditions; carries the largest remaining violation.
    Convergence { max_violation: f64 },
    /// Data made an operation impossible (e.g. single-class folds).
    Data(String),
    /// Malformed model or configuration file.
    Format(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Argument(s) => write!(f, "invalid argument: {s}"),
            Self::Schema(s) => write!(f, "schema error: {s}"),
            Self::Row { line, msg } => write!(f, "row error at line {line}: {msg}"),
            Self::EmptyDataset => write!(f, "empty dataset: no data rows"),
            Self::DegenerateFeature { index } => {
                write!(f, "degenerate feature {index}: zero variance on training data")
            }
            Self::Convergence { max_violation } => write!(
                f,
                "solver did not converge: max KKT violation {max_violation:e}"
            ),
            Self::Data(s) => write!(f, "data error: {s}"),
            Self::Format(s) => write!(f, "format error: {s}"),
            Self::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        if let Self::Io(e) = self {
            Some(e)
        } else {
            None
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
