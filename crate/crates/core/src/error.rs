use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency table is empty")]
    EmptyTable,
    #[error("frequency table has zero total count")]
    ZeroTotal,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty input")]
    EmptyInput,
    #[error("empty token")]
    EmptyToken,
    #[error("duplicate token `{0}`")]
    DuplicateToken(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("token `{token}` at position {position} is not in the vocabulary")]
    OutOfVocabulary { token: String, position: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in embedding row for `{0}`")]
    NonFiniteValue(String),
    #[error("all-zero embedding row for `{0}`")]
    ZeroVector(String),
    #[error("k={k} exceeds the {available} available candidates")]
    KTooLarge { k: usize, available: usize },
    #[error("vocabulary of size {size} is smaller than tuple size {tuple_size}")]
    VocabularyTooSmall { size: usize, tuple_size: usize },
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("token `{0}` appears in more than one tuple")]
    TupleOverlap(String),
    #[error("representative `{0}` is not a member of its tuple")]
    RepresentativeNotInTuple(String),
    #[error("tuples and leftovers do not cover the vocabulary (missing `{0}`)")]
    IncompleteCover(String),
    #[error("observed token `{0}` is a tuple member but not its representative")]
    NonRepresentativeObserved(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
