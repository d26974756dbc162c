//! Crate error type.

use crate::simplex::LpStatus;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two sides of an operation disagree on a dimension. `axis` names the
    /// mismatched quantity (e.g. "d_vars", "n_rows", "k_classes").
    #[error("dimension mismatch on {axis}: expected {expected}, got {got}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("label {label} at row {row} outside 1..={k_classes}")]
    InvalidLabel {
        row: usize,
        label: i64,
        k_classes: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{what} must be positive, got {got}")]
    NonPositive { what: &'static str, got: f64 },

    #[error("unsupported basis degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(u32),

    #[error("nonzero coefficient w[{k},{j}] = {value} at infinite penalty weight")]
    InfiniteWeightViolated { k: usize, j: usize, value: f64 },

    #[error("penalty weights invalid: {0}")]
    BadWeights(String),

    #[error("LP solve ended with status {0:?}")]
    SolverStatus(LpStatus),

    #[error("all lambda values in the grid failed to fit")]
    AllLambdaFailed,

    #[error("lambda grid is empty")]
    EmptyGrid,

    #[error("{0}")]
    InvalidInput(String),

    /// CSV parse failure; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {msg}")]
    Csv {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Csv {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
