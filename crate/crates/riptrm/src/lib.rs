//! Primal-dual interior-point trust-region optimization on Riemannian manifolds.
//!
//! This crate solves inequality-constrained problems of the form
//!
//! ```text
//!     minimize f(x)  over x in M,   subject to g_i(x) >= 0,  i = 1..m,
//! ```
//!
//! where `M` is a smooth matrix manifold (Euclidean space, sphere, Grassmann,
//! symmetric positive definite matrices, skew-symmetric matrices, or a product
//! of these). The method drives a barrier parameter to zero across outer
//! iterations; each inner iteration solves a trust-region subproblem built
//! from the condensed primal-dual Newton system, takes a dual Newton step,
//! and accepts or rejects the move against a log-barrier merit function.
//!
//! Three subproblem solvers are provided: the Cauchy step, Steihaug-Toint
//! truncated conjugate gradients, and an exact eigenvalue-based solver with
//! hard-case handling. The exact solver enables convergence to second-order
//! stationary points.
//!
//! Modules:
//! - [`linalg`]: dense symmetric eigendecomposition, Cholesky solves, thin QR.
//! - [`manifold`]: manifold geometry (metrics, retractions, tangent bases,
//!   gradient/Hessian conversion).
//! - [`problem`]: problem container, Lagrangian and barrier quantities,
//!   KKT residuals, second-order stationarity measure.
//! - [`trs`]: trust-region subproblem solvers and the global-optimality
//!   verifier.
//! - [`solver`]: the inner/outer iteration, radius and acceptance rules,
//!   dual clipping, stopping conditions.
//! - [`fdcheck`]: finite-difference validation of user-supplied derivatives.

pub mod error;
pub mod fdcheck;
pub mod linalg;
pub mod manifold;
pub mod problem;
pub mod solver;
pub mod trs;

pub use error::Error;
pub use manifold::{Manifold, ManifoldDescriptor, Point, Tangent};
pub use problem::{FunctionOracle, PrimalDualPair, ResidualBreakdown, RicoProblem};
pub use solver::{InnerConfig, OuterConfig, StoppingConditions, Subsolver};
pub use trs::{TrsInstance, TrsSolution, TrsStatus};
