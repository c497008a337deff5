use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("reward kind {0} is not differentiable and cannot drive a primal gradient")]
    NonDifferentiable(&'static str),

    #[error("non-finite value at iteration {iteration}: {what}")]
    Numeric { iteration: u64, what: String },

    #[error("degenerate class prior p = {0} (must lie strictly inside (0, 1))")]
    DegeneratePrior(f64),

    #[error("rate is undefined: no {0} examples")]
    UndefinedRate(&'static str),

    #[error("value {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("denominator {denominator} fell below its lower bound {bound}")]
    Degeneracy { denominator: f64, bound: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate synthetic spec: {0}")]
    DegenerateSpec(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
