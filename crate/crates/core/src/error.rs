use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A syntax or semantic error in model or query text, positioned at a
/// 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid variable name `{0}`")]
    InvalidName(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix {matrix} is singular: reciprocal condition number {rcond:e} is below the floor {floor:e}")]
    Singular {
        matrix: &'static str,
        rcond: f64,
        floor: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("contradictory evidence: {0}")]
    ContradictoryEvidence(String),

    #[error("value {value} for boolean variable `{variable}` is not 0 or 1")]
    NonBooleanValue { variable: String, value: f64 },

    #[error("no world is consistent with the observations")]
    NoConsistentWorld,

    #[error("model has {roots} root variables; enumeration is capped at {max}")]
    TooManyRoots { roots: usize, max: usize },

    #[error("sample count must be at least {min}, got {n}")]
    SampleCount { n: usize, min: usize },

    #[error("rejection band must be positive and finite, got {0}")]
    InvalidBand(f64),

    #[error(
        "no sample out of {n} fell inside the band of half-width {delta:e}; raise --delta or --n"
    )]
    ZeroAcceptance { n: usize, delta: f64 },

    #[error("{0}")]
    Query(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}
