use thiserror::Error;

/// Errors raised by the tensor kernels, the model, the sampler and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rank {rank} exceeds dimension {dim} in mode {mode}")]
    RankExceedsDimension { mode: usize, rank: usize, dim: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular precision matrix in block {0}")]
    SingularPrecision(String),

    #[error("parameter out of support: {0}")]
    OutOfSupport(String),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("sweep {sweep}, block {block}: {source}")]
    Block {
        sweep: usize,
        block: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("missing cells (first {shown} of {total}): {keys}")]
    MissingCells { total: usize, shown: usize, keys: String },

    #[error("duplicate cell {0}")]
    DuplicateCell(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_block(self, sweep: usize, block: impl Into<String>) -> Error {
        Error::Block {
            sweep,
            block: block.into(),
            source: Box::new(self),
        }
    }
}
