//! Crate-wide error type.

use crate::validate::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two embeddings (or an embedding and an index) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// A vector that must have positive L2 norm is zero (or text produced no tokens).
    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    /// A document, file, or wire payload could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),

    /// A hierarchy violates its structural invariants.
    #[error("invalid index: {}", format_violations(.0))]
    InvalidIndex(Vec<Violation>),

    #[error("unknown tokenizer: {0:?}")]
    UnknownTokenizer(String),

    #[error("unknown summarizer: {0:?}")]
    UnknownSummarizer(String),

    #[error("unknown embedder: {0:?}")]
    UnknownEmbedder(String),

    #[error("unknown metric: {0:?}")]
    UnknownMetric(String),

    #[error("empty document: {0}")]
    EmptyDocument(String),

    /// Remote embedding service failed after retries or returned a malformed batch.
    #[error("embedding service error: {0}")]
    EmbedService(String),

    #[error("empty reference")]
    EmptyReference,

    /// Mismatched lengths or shapes between paired inputs.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A result record references a query id absent from the dataset.
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),

    #[error("reader error for query {query_id:?}: {message}")]
    Reader { query_id: String, message: String },

    /// A hard benchmark postcondition did not hold.
    #[error("benchmark postcondition violated: {0}")]
    BenchPostcondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    const SHOWN: usize = 5;
    let mut out = String::new();
    for (i, v) in violations.iter().take(SHOWN).enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&v.to_string());
    }
    if violations.len() > SHOWN {
        out.push_str(&format!(" (+{} more)", violations.len() - SHOWN));
    }
    out
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
