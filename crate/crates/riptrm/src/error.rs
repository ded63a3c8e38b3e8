//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed argument: wrong shape, mismatched base point, bad parameter.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Cholesky factorization failed; the matrix is not positive definite.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A triangular factor has a (numerically) zero diagonal entry.
    #[error("matrix is rank deficient (|r[{index},{index}]| = {value:.3e})")]
    RankDeficient { index: usize, value: f64 },

    /// A barrier quantity was requested at a point with g_i(x) <= 0.
    #[error("point is not strictly feasible: g[{index}] = {value:.6e}")]
    NotStrictlyFeasible { index: usize, value: f64 },

    /// An operation was invoked in a state that violates its contract.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A solver produced a result that fails its own verification.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// The feasibility phase ran out of restarts.
    #[error("could not find a strictly feasible interior point: {0}")]
    FeasibilityFailure(String),

    /// A computed quantity violates an internal invariant (e.g. a retraction
    /// left the manifold).
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),
}
