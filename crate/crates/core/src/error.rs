//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or state spaces that do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A layer or coordinate index out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Hadamard product of distributions with disjoint supports.
    #[error("degenerate product: the supports are disjoint")]
    DegenerateProduct,

    /// Division by a distribution that has a zero entry.
    #[error("positivity error: {0}")]
    Positivity(String),

    /// Conditioning on an event of zero probability.
    #[error("conditioning on a zero-mass event")]
    Conditioning,

    /// Brute-force enumeration above the configured state limit.
    #[error("oracle limit exceeded: {states} joint states > limit {limit}")]
    OracleLimit { states: u128, limit: u128 },

    /// Malformed serialized document.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// A sharing step or support set that violates the construction rules.
    #[error("plan error: {0}")]
    Plan(String),

    /// Architecture that the compiler cannot or will not build.
    #[error("unsupported architecture: {0}")]
    Architecture(String),

    /// The sharpness budget ran out before the tolerance was met.
    #[error("convergence failure: best KL {best_kl:e} at beta {best_beta} exceeds tolerance {tolerance:e}")]
    Convergence {
        best_kl: f64,
        best_beta: f64,
        tolerance: f64,
        outcome: Box<crate::compiler::Compiled>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
