use thiserror::Error;

/// Errors raised by the engine. Parse errors carry a 1-based line/column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown attribute `{attribute}` in relation `{relation}`")]
    UnknownAttribute { relation: String, attribute: String },

    #[error("arity mismatch for `{relation}`: expected {expected}, found {found}")]
    Arity {
        relation: String,
        expected: usize,
        found: usize,
    },

    #[error("type error: {0}")]
    Type(String),

    #[error("unsafe query: variable `{0}` does not occur in a positive atom")]
    Unsafe(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("transaction `{0}` is empty")]
    EmptyTransaction(String),

    #[error("duplicate transaction label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown transaction label `{0}`")]
    UnknownLabel(String),

    #[error("current state violates its integrity constraints (R |= IC is required): {0}")]
    StateViolatesConstraints(String),

    #[error("resource guard exceeded: {0}")]
    Guard(String),

    #[error("no specialised algorithm applies: {0}")]
    Dispatch(String),

    #[error("invalid separation spec: {0}")]
    InvalidSpec(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("aggregate applied to an empty bag")]
    EmptyBag,

    #[error("{line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
