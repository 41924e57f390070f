//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by constructors, evaluators, and parsers.
#[derive(Debug, Error)]
pub enum Error {
    /// A key fell outside the universe `1..=n`.
    #[error("key {key} out of range 1..={n}")]
    KeyOutOfRange { key: i64, n: usize },

    /// An operation that needs at least one access got an empty sequence.
    #[error("sequence must be nonempty")]
    EmptySequence,

    /// Input claimed to be a permutation of `1..=n` but is not.
    #[error("not a permutation of 1..={n}: {reason}")]
    NotPermutation { n: usize, reason: String },

    /// A structural precondition failed (bad partition, mismatched
    /// template counts, rotation of a root, absent key, ...).
    #[error("{0}")]
    InvalidInput(String),

    /// Instance exceeds a documented size guard for an exact algorithm.
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    /// Text parse failure for the sequence/tree/trace file formats.
    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn guard(msg: impl Into<String>) -> Self {
        Error::SizeGuard(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
