use thiserror::Error;

/// Errors produced by model construction, parsing, simulation and search.
#[derive(Debug, Error)]
pub enum PomdpError {
    /// Malformed `.pomdp` input. Line and column are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Structurally well-formed input with bad numerics (non-stochastic rows,
    /// invalid discount, non-finite rewards, ...).
    #[error("model validation failed: {0}")]
    Validation(String),

    /// The caller materialized an observation branch with Pr(z|b,a) = 0.
    #[error("observation {observation} has zero probability under action {action}")]
    ZeroProbabilityObservation { action: usize, observation: usize },

    /// Attempted to step the environment from an absorbing terminal state.
    #[error("environment is in a terminal state")]
    TerminalState,

    /// `expand` was called on a node that already has children.
    #[error("expand called on a non-fringe node")]
    ExpandNonFringe,

    /// A domain generator was given an unusable rock layout.
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    /// Bad planner or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PomdpError>;
