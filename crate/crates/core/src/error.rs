use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or instance dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An input violates a documented precondition (entry range, regularity,
    /// set sizes, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A recursion failed to make progress; aborting instead of looping.
    #[error("non-termination guard tripped: {0}")]
    NonTermination(String),

    /// The pluggable hash source could not produce a sum-order-preserving
    /// hash (search budget exhausted or no hash found).
    #[error("hash source unavailable: {0}")]
    HashUnavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
