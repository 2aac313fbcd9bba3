use thiserror::Error;

use crate::substrate::MemoryId;

pub type Result<T, E = MemoryError> = std::result::Result<T, E>;

/// Errors raised by the memory engine.
#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("memory state is frozen; write operations are disabled")]
    FrozenState,

    #[error("record invariant violated on field `{field}`: {reason}")]
    InvariantViolation { field: &'static str, reason: String },

    #[error("episode content is empty")]
    EmptyContent,

    #[error("address requires at least one key")]
    NoKeys,

    #[error("unknown memory id {0}")]
    UnknownId(MemoryId),

    #[error("no salience record for trace {0}")]
    UnknownRef(MemoryId),

    #[error("facts do not share subject and predicate: ({old_subject}, {old_predicate}) vs ({new_subject}, {new_predicate})")]
    PredicateMismatch {
        old_subject: String,
        old_predicate: String,
        new_subject: String,
        new_predicate: String,
    },

    #[error("fact {0} is already superseded")]
    NotLive(MemoryId),

    #[error("confidence {0} is outside [0, 1]")]
    BadConfidence(f64),

    #[error("query text is empty")]
    EmptyQuery,

    #[error("text to embed is empty")]
    EmptyText,

    #[error("rank fusion constant k must be positive and finite, got {0}")]
    BadK(f64),

    #[error("invalid weights: {0}")]
    BadWeights(String),

    #[error("duplicate ranked list for source {0}")]
    DuplicateSource(&'static str),

    #[error("probe set is empty")]
    EmptyProbeSet,

    #[error("invalid probe at line {line}: {reason}")]
    InvalidProbe { line: usize, reason: String },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("invalid timestamp `{0}`")]
    BadTimestamp(String),

    #[error("unknown brain region `{0}`")]
    UnknownRegion(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("archive is corrupt: {0}")]
    ArchiveCorrupt(String),

    #[error("archive format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),

    #[error("extractor unavailable: {0}")]
    ExtractorUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MemoryError {
    pub(crate) fn invariant(field: &'static str, reason: impl Into<String>) -> Self {
        MemoryError::InvariantViolation {
            field,
            reason: reason.into(),
        }
    }
}
