//! Error types shared across the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library surface.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A required CSV header column is missing or renamed.
    #[error("schema error: missing or renamed column `{column}` (expected header `{expected}`)")]
    Schema { column: String, expected: String },

    /// A cell failed to parse as the required type.
    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        /// 1-based data row index (header excluded).
        row: usize,
        column: String,
        message: String,
    },

    /// Input contained no data.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Two rows share the same (battery, cycle) key.
    #[error("duplicate cycle {cycle} for battery `{battery_id}`")]
    DuplicateCycle { battery_id: String, cycle: u32 },

    /// A battery id was requested that the dataset does not contain.
    #[error("unknown battery `{requested}`; available: {}", available.join(", "))]
    UnknownBattery {
        requested: String,
        available: Vec<String>,
    },

    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Diverged { epoch: usize, batch: usize },

    /// A model file is malformed.
    #[error("model format error: {0}")]
    Format(String),

    /// A model file was written by an incompatible format version.
    #[error("model format version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    /// An error raised while processing one cross-validation fold.
    #[error("fold {index}: {source}")]
    Fold {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a fold index to an error propagating out of cross-validation.
    pub fn in_fold(self, index: usize) -> Self {
        Error::Fold {
            index,
            source: Box::new(self),
        }
    }
}
