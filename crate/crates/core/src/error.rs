use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("membership ({node}, {hyperedge}) out of range for {num_nodes} nodes x {num_hyperedges} hyperedges")]
    MembershipOutOfRange {
        node: usize,
        hyperedge: usize,
        num_nodes: usize,
        num_hyperedges: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in record {index} of {context}")]
    NonFiniteValue { context: String, index: usize },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("{path}:{line}: malformed line `{content}`: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        content: String,
        reason: String,
    },

    #[error("{path}:{line}: unknown {side} id `{id}`")]
    UnknownId {
        path: PathBuf,
        line: usize,
        side: &'static str,
        id: String,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u8, expected: u8 },

    #[error("checkpoint header is corrupt: {0}")]
    CheckpointHeader(String),

    #[error("checkpoint body has {actual} bytes, expected {expected}")]
    CheckpointBody { expected: usize, actual: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::NonFiniteGradient { .. } => 3,
            Error::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}
