//! Error types shared across the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {op} got {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid axis {axis} for shape {shape:?}")]
    InvalidAxis { axis: usize, shape: Vec<usize> },

    #[error("trainable parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("malformed input at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },

    #[error("unknown label `{label}` for address `{address}`")]
    UnknownLabel { address: String, label: String },

    #[error("timestamps must be ascending (index {index})")]
    DescendingTimestamps { index: usize },

    #[error("corpus contains no windows")]
    EmptyCorpus,

    #[error("word id {0} never occurs in the corpus")]
    UnknownWord(u32),

    #[error("threshold {0} outside [0, 1)")]
    InvalidThreshold(f64),

    #[error("lambda {0} outside [0, 1]")]
    InvalidLambda(f64),

    #[error("token id {id} outside vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("masked batch has no masked positions")]
    NoMaskedPositions,

    #[error("checkpoint vocabulary size {checkpoint} does not match corpus vocabulary size {corpus}")]
    VocabularyMismatch { checkpoint: usize, corpus: usize },

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("missing artifact `{0}` — run the producing stage first")]
    MissingArtifact(String),

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
