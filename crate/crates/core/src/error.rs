//! Error type shared by all modules.

use thiserror::Error;

/// Unified error type for fallible operations in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument has the wrong dimension.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The constraint Jacobian lost full row rank (LICQ failure).
    #[error("rank deficient constraint Jacobian: sigma_min = {sigma_min:.3e} (tol {tol:.3e})")]
    RankDeficient { sigma_min: f64, tol: f64 },

    /// An inner iteration ran out of budget.
    #[error("{what} did not converge in {max_iter} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        max_iter: usize,
        residual: f64,
    },

    /// The linearized system is singular; transversality fails at this point.
    #[error("singular linearized system: sigma_min = {sigma_min:.3e}")]
    SingularLinearization { sigma_min: f64 },

    /// A documented precondition does not hold for the supplied arguments.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// The requested operation is not available for this variant.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The queried point lies outside the feasible set.
    #[error("infeasible point: constraint violation {violation:.3e}")]
    InfeasiblePoint { violation: f64 },

    /// A scalar parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A brute-force oracle found no (or several) solutions.
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// Phase 1 never produced a stable nondegenerate active set.
    #[error("active-set identification stalled after {iterations} iterations")]
    IdentificationStall { iterations: usize },

    /// Too few usable points to fit a convergence order.
    #[error("not enough usable data points to fit a convergence order")]
    InsufficientData,
}

pub type Result<T> = std::result::Result<T, Error>;
