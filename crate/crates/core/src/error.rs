use std::io;

use crate::entity::EntityId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus: no record yielded any token")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("term index {index} out of range for vocabulary of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),

    #[error("entity {0} has a zero context vector")]
    InactiveEntity(EntityId),

    #[error("background sample of {requested} needs between 2 and {available} active entities")]
    SampleTooSmall { requested: usize, available: usize },

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("no query token matched an indexed entity")]
    EmptyQuery { unresolved: Vec<String> },

    #[error("query vector is zero")]
    NoSignal,

    #[error("distance matrix is empty")]
    DegenerateInput,

    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
