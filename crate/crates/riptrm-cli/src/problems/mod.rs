//! Built-in benchmark problems.

mod analytic;
mod rosenbrock;
mod stable_linsys;

pub use analytic::build_analytic_1d;
pub use rosenbrock::{build_rosenbrock_grassmann, RosenbrockGrassmannSpec};
pub use stable_linsys::{build_stable_linsys, StableLinSysData, StableLinSysSpec};

/// Names accepted by the `--problem` flag.
pub const PROBLEM_NAMES: &[&str] = &["rosenbrock-grassmann", "stable-linsys", "analytic-1d"];
