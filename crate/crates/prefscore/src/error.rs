//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants carry
//! enough context (ids, line numbers, record indices, dimensions) that a
//! caller can report a failure without re-deriving it; the FFI layer also
//! maps each variant onto a stable numeric status code.

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A file could not be parsed (CSV/JSONL/TOML/JSON), with 1-based
    /// line number when known.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Two items in the same set share an id.
    #[error("duplicate item id {id:?}")]
    DuplicateId { id: String },

    /// An id referenced by a record or query does not exist in the item set.
    #[error("unknown item id {id:?}")]
    UnknownId { id: String },

    /// An input set was empty where at least one item is required.
    #[error("no items: {context}")]
    Empty { context: String },

    /// A structural invariant on an input value failed.
    #[error("invalid input: {message}")]
    Invalid { message: String },

    /// A comparison label was outside {0, 0.5, 1}.
    #[error("invalid comparison label {value} (expected 0, 0.5, or 1)")]
    InvalidLabel { value: f64 },

    /// A stored record's debiased label disagrees with its raw labels.
    #[error(
        "record {index}: stored debiased label {stored} does not match \
         debias({c_ij}, {c_ji}) = {expected}"
    )]
    DebiasMismatch {
        index: usize,
        c_ij: f64,
        c_ji: f64,
        stored: f64,
        expected: f64,
    },

    /// More pairs were requested than distinct unordered pairs exist.
    #[error("requested {requested} pairs but only {capacity} distinct pairs exist for {n} items")]
    PairCapacity {
        requested: usize,
        capacity: usize,
        n: usize,
    },

    /// Embedding vectors disagree in dimension.
    #[error("embedding dimension mismatch for {id:?}: expected {expected}, got {actual}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        actual: usize,
    },

    /// Items required an embedding but none was present.
    #[error("{count} item(s) have no embedding (first: {first:?})")]
    MissingEmbedding { count: usize, first: String },

    /// A prompt template did not contain a required placeholder exactly once.
    #[error(
        "template {path:?}: placeholder {placeholder} must appear exactly once, found {found}"
    )]
    TemplatePlaceholder {
        path: String,
        placeholder: &'static str,
        found: usize,
    },

    /// A judge response could not be turned into a verdict.
    #[error("could not parse a verdict from judge response: {reason}")]
    VerdictParse { reason: String },

    /// Transport-level failure talking to a remote endpoint.
    #[error("remote request to {endpoint} failed: {message}")]
    Remote { endpoint: String, message: String },

    /// A required credential environment variable is missing or empty.
    #[error("credential environment variable {name} is not set")]
    MissingCredential { name: String },

    /// A judge query failed after the configured number of attempts.
    #[error("judge failed for pair ({i}, {j}) after {attempts} attempt(s): {last_error}")]
    JudgeExhausted {
        i: String,
        j: String,
        attempts: usize,
        last_error: String,
    },

    /// A metric is mathematically undefined on the given inputs.
    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        reason: String,
    },

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {message}")]
    Config { message: String },

    /// Artifacts produced under different configurations were mixed.
    #[error("provenance mismatch: {message}")]
    Provenance { message: String },

    /// Too many pairs were skipped for the run to be trustworthy.
    #[error(
        "{skipped} of {requested} pairs were skipped ({percent:.1}%), above the configured limit"
    )]
    TooManySkips {
        skipped: usize,
        requested: usize,
        percent: f64,
    },
}

impl Error {
    /// Helper to build an [`Error::Io`] with path context.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Helper to build an [`Error::Invalid`].
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid {
            message: message.into(),
        }
    }

    /// Helper to build an [`Error::Config`].
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
        }
    }
}
