use std::path::PathBuf;

/// Problems reading the text formats.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a hexadecimal float literal: {0:?}")]
    Literal(String),
    #[error("component {index} of {expected} is missing")]
    MissingComponent { index: usize, expected: usize },
    #[error(transparent)]
    Value(#[from] mpgemm_core::Error),
    #[error("bad MPMAT header: {0:?}")]
    Header(String),
    #[error("precision tag {found:?} does not match the requested {expected:?}")]
    Precision { expected: &'static str, found: String },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<FormatError>,
    },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors from the benchmark harness and its output files.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mpgemm_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}
