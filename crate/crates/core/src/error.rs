use std::path::PathBuf;

/// Errors produced by every stage of the selection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("unknown label {label:?} in {split} split (row {row})")]
    UnknownLabel { label: String, split: String, row: usize },

    #[error("duplicate id {id} in {split} split")]
    DuplicateId { id: usize, split: String },

    #[error("empty {0} split")]
    EmptySplit(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("empty vocabulary: every training document is empty")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector kind mismatch: cannot compare sparse with dense vectors")]
    KindMismatch,

    #[error("non-finite value in embedding for id {0}")]
    NonFinite(usize),

    #[error("embedding id {id} not in split of size {split_len}")]
    UnknownId { id: usize, split_len: usize },

    #[error("missing embedding for id {0}")]
    MissingVector(usize),

    #[error("candidate count K must be positive")]
    ZeroCandidates,

    #[error("empty candidate pool")]
    EmptyPool,

    #[error("invalid selection config: {0}")]
    InvalidConfig(String),

    #[error("template references unknown field {{{0}}}")]
    UnknownField(String),

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("request failed after {attempts} attempts: {message}")]
    RetriesExhausted { attempts: usize, message: String },

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("baseline F1 is zero")]
    ZeroBaseline,

    #[error("query {query_id} failed")]
    Query {
        query_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_query(self, query_id: usize) -> Self {
        Error::Query {
            query_id,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
