use alloc::string::String;

/// Errors reported by the matrix, Ozaki and LU layers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Shape { op: &'static str, left_rows: usize, left_cols: usize, right_rows: usize, right_cols: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite input element at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is singular (no usable pivot in column {0})")]
    Singular(usize),
    #[error("division by zero")]
    DivisionByZero,
    #[error("components do not form a renormalized multi-float")]
    NotRenormalized,
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left_rows: left.0, left_cols: left.1, right_rows: right.0, right_cols: right.1 }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
