use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the function (non-positive length, frequency, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument combination is invalid (empty multipole range, bad tolerance, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// `1 - M` is singular, i.e. the round-trip operator is not a contraction.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// A quadrature or truncation refinement moved a result by more than the tolerance.
    #[error(
        "no convergence: {what} (worst relative change {worst:.3e}, tolerance {tolerance:.3e})"
    )]
    Convergence {
        what: String,
        worst: f64,
        tolerance: f64,
    },

    /// A value exists only in log-scaled form and cannot be represented as `f64`.
    #[error("value out of f64 range (ln|v| = {0})")]
    Overflow(f64),

    /// Least-squares fit could not be carried out.
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
