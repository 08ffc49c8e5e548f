//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. The variants
//! separate caller mistakes ([`Error::Argument`]), admissibility failures of
//! the nonlinear operator ([`Error::ConeViolation`]), floating-point/quadrature
//! breakdowns ([`Error::Numeric`]), infeasible barrier constants
//! ([`Error::Constants`]), iteration failures carrying their diagnostics
//! ([`Error::Nonconvergence`]), and objects used outside their valid state
//! ([`Error::State`]).

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated (dimensions, ranges, NaN).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The k-th elementary symmetric function fell below the admissibility
    /// floor, so the operator F = sigma_k^(1/k) is not differentiable there.
    #[error("cone violation: sigma_k = {sigma_k:.6e} is below the floor {floor:.1e}")]
    ConeViolation { sigma_k: f64, floor: f64 },

    /// A numeric routine (quadrature, linear solve, regression) failed to
    /// reach its accuracy target.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Barrier constants could not be selected so that the required
    /// inequalities hold; the message says which inequality failed and how
    /// to enlarge the search.
    #[error("barrier constants infeasible: {0}")]
    Constants(String),

    /// An iterative solve stopped without meeting its tolerance. The report
    /// carries the residual history so callers can escalate (for example to
    /// a continuation schedule) or surface diagnostics.
    #[error("nonlinear solve did not converge: {summary}")]
    Nonconvergence {
        summary: String,
        report: Box<crate::dirichlet::SolveReport>,
    },

    /// The object is not in a state that supports the requested operation.
    #[error("invalid state: {0}")]
    State(String),

    /// Filesystem / serialization problems when reading or writing artifacts.
    #[error("io failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(format!("json: {e}"))
    }
}
