use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// The variants split into two families that the command-line front end maps
/// onto distinct exit codes: validation problems (bad input, bad config,
/// incompatible checkpoints) and numeric failures (overflow, NaN, failed
/// gradient checks).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {shapes:?}")]
    Shape { op: &'static str, shapes: Vec<Vec<usize>> },

    #[error("non-finite value produced by node {node} ({op})")]
    Overflow { node: usize, op: &'static str },

    #[error("loss node must hold a single scalar, found shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("graph has not been evaluated since its leaves were rebound")]
    NotEvaluated,

    #[error("invalid graph operation: {0}")]
    Graph(String),

    #[error("gradient for parameter `{0}` contains NaN; refusing to update")]
    NanGradient(String),

    #[error("loss closure is not deterministic ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error("line {line}: {msg}")]
    Corpus { line: usize, msg: String },

    #[error("unknown dependency label `{0}`")]
    UnknownLabel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerics rather than by inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::NanGradient(_)
                | Error::NonDeterministic { .. }
                | Error::NanLoss { .. }
                | Error::GradCheck(_)
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
