use std::path::PathBuf;

/// Errors raised by the fabisearch library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("reconstruction is zero at ({row}, {col}) where the data is positive")]
    SingularReconstruction { row: usize, col: usize },

    #[error("invalid rank {rank}: must satisfy 1 <= rank < {limit}")]
    Rank { rank: usize, limit: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("non-positive value {value} at row {row}, column {col}")]
    NonPositive { row: usize, col: usize, value: f64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate segment: rows {start}..{end} contain fewer than 2 time points")]
    DegenerateSegment { start: usize, end: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("atlas has {atlas_rows} rows but the adjacency matrix is {nodes}x{nodes}")]
    AtlasMismatch { atlas_rows: usize, nodes: usize },

    #[error(
        "rescaling produced non-positive value {value} at row {row}, column {col}; \
         use a smaller scale factor or a larger shift"
    )]
    Rescale { row: usize, col: usize, value: f64 },

    #[error("invalid simulation spec: {0}")]
    Spec(String),

    #[error("{path}: line {line}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
