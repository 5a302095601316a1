use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pruning engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A `PruneConfig` constraint failed, possibly against a volume's shape.
    #[error("invalid config: {0}")]
    Config(String),

    /// A caller-supplied value (shape, index, threshold) is unusable.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A binary container header or layout is malformed.
    #[error("format error: {0}")]
    Format(#[from] FormatError),

    /// A container parsed but its payload is unusable (e.g. non-finite values).
    #[error("data error: {0}")]
    Data(String),

    /// A pipeline stage failed; wraps the underlying cause.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage wrappers and returns the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure came from the filesystem rather than from the data.
    pub fn is_io(&self) -> bool {
        matches!(self.root(), Error::Io(_))
    }
}

/// Specific ways a binary container can be malformed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("reserved header bytes must be zero")]
    ReservedNonZero,
    #[error("zero or overflowing dimension in {0}")]
    BadDimension(&'static str),
    #[error("truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(u64),
    #[error("block {block} has {found} tokens, expected {expected}")]
    InconsistentTokens {
        block: usize,
        expected: usize,
        found: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
