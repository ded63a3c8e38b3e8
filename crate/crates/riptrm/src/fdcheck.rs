//! Finite-difference validation of oracle derivatives.
//!
//! Three families of checks per oracle:
//! - central-difference match of the Riemannian gradient against the
//!   directional derivative through the retraction;
//! - central-difference match of the ambient Hessian application against
//!   differences of the ambient gradient;
//! - Taylor-order checks through the (second-order) retraction: the
//!   first-order residual must decay at order two, the second-order residual
//!   at order three.
//!
//! Slopes are least-squares fits of log residual against log step over a
//! dyadic ladder, with residuals at the numerical noise floor discarded; the
//! pass thresholds `order - 0.1` absorb the estimator's finite-step bias.
//! Residual ladders that sit entirely at the noise floor count as exact.

use nalgebra::DVector;

use crate::error::Error;
use crate::manifold::{gaussian_vector, Manifold, Point};
use crate::problem::{FunctionOracle, RicoProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Central-difference step for first-derivative matches.
    pub fd_step: f64,
    /// Relative tolerance for the first-derivative matches.
    pub fd_rel_tol: f64,
    /// Largest Taylor step; halved `taylor_halvings - 1` times.
    pub taylor_t0: f64,
    pub taylor_halvings: usize,
    /// Minimum acceptable slope of the first-order Taylor residual.
    pub grad_slope_min: f64,
    /// Minimum acceptable slope of the second-order Taylor residual.
    pub hess_slope_min: f64,
    /// Number of random directions per check.
    pub directions: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            fd_step: 1e-5,
            fd_rel_tol: 1e-5,
            taylor_t0: 1e-2,
            taylor_halvings: 6,
            grad_slope_min: 1.9,
            hess_slope_min: 2.9,
            directions: 3,
        }
    }
}

/// Outcome of the derivative checks for one oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleReport {
    pub max_grad_rel_err: f64,
    pub max_ehess_rel_err: f64,
    pub min_grad_slope: f64,
    pub min_hess_slope: f64,
    pub pass: bool,
}

/// Least-squares slope of log residual vs log step; infinite when fewer than
/// two residuals rise above the floor (an exactly-represented Taylor model).
fn fit_slope(ts: &[f64], rs: &[f64], floor: f64) -> f64 {
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .zip(rs)
        .filter(|(_, &r)| r > floor)
        .map(|(&t, &r)| (t.ln(), r.ln()))
        .collect();
    if pairs.len() < 2 {
        return f64::INFINITY;
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Run all derivative checks for one oracle at the point `x`.
pub fn check_oracle(
    manifold: &Manifold,
    oracle: &FunctionOracle,
    x: &Point,
    seed: u64,
    opts: &CheckOptions,
) -> Result<OracleReport, Error> {
    let mut max_grad_rel_err = 0.0f64;
    let mut max_ehess_rel_err = 0.0f64;
    let mut min_grad_slope = f64::INFINITY;
    let mut min_hess_slope = f64::INFINITY;

    let f0 = oracle.value(x);
    let egrad = oracle.egrad(x);
    let rgrad = manifold.egrad_to_rgrad(x, &egrad)?;
    let noise_floor = 1e-12 * (1.0 + f0.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for dir in 0..opts.directions {
        let v = manifold.sample_tangent(x, seed.wrapping_add(dir as u64 + 1))?;
        let vnorm = manifold.norm(x, &v)?;
        if vnorm == 0.0 {
            continue;
        }
        let v = v.scaled(1.0 / vnorm);

        // gradient vs directional derivative
        let ip = manifold.inner(x, &rgrad, &v)?;
        let h = opts.fd_step;
        let fp = oracle.value(&manifold.retract(x, &v.scaled(h))?);
        let fm = oracle.value(&manifold.retract(x, &v.scaled(-h))?);
        let fd = (fp - fm) / (2.0 * h);
        max_grad_rel_err = max_grad_rel_err.max(rel_err(fd, ip));

        // ambient Hessian vs differences of the ambient gradient
        let u = gaussian_vector(&mut rng, manifold.ambient_dim());
        let u = &u / u.norm().max(1e-300);
        let xp = Point::new(&x.coords + &u * h);
        let xm = Point::new(&x.coords - &u * h);
        let fd_grad: DVector<f64> = (oracle.egrad(&xp) - oracle.egrad(&xm)) / (2.0 * h);
        let hu = oracle.ehess_apply(x, &u);
        let scale = 1.0 + hu.norm().max(fd_grad.norm());
        max_ehess_rel_err = max_ehess_rel_err.max((&fd_grad - &hu).norm() / scale);

        // Taylor ladders through the retraction
        let ehess_v = oracle.ehess_apply(x, &v.ambient);
        let rhess_v = manifold.ehess_to_rhess(x, &egrad, &ehess_v, &v)?;
        let quad = manifold.inner(x, &rhess_v, &v)?;
        let mut ts = Vec::with_capacity(opts.taylor_halvings);
        let mut r1 = Vec::with_capacity(opts.taylor_halvings);
        let mut r2 = Vec::with_capacity(opts.taylor_halvings);
        for j in 0..opts.taylor_halvings {
            let t = opts.taylor_t0 / f64::powi(2.0, j as i32);
            let ft = oracle.value(&manifold.retract(x, &v.scaled(t))?);
            ts.push(t);
            r1.push((ft - f0 - t * ip).abs());
            r2.push((ft - f0 - t * ip - 0.5 * t * t * quad).abs());
        }
        min_grad_slope = min_grad_slope.min(fit_slope(&ts, &r1, noise_floor));
        min_hess_slope = min_hess_slope.min(fit_slope(&ts, &r2, noise_floor));
    }

    let pass = max_grad_rel_err <= opts.fd_rel_tol
        && max_ehess_rel_err <= opts.fd_rel_tol
        && min_grad_slope >= opts.grad_slope_min
        && min_hess_slope >= opts.hess_slope_min;
    Ok(OracleReport {
        max_grad_rel_err,
        max_ehess_rel_err,
        min_grad_slope,
        min_hess_slope,
        pass,
    })
}

/// Check the objective and every constraint of a problem at `x`.
pub fn check_problem(
    problem: &RicoProblem,
    x: &Point,
    seed: u64,
    opts: &CheckOptions,
) -> Result<Vec<(String, OracleReport)>, Error> {
    let mut out = Vec::with_capacity(1 + problem.constraints.len());
    out.push((
        "objective".to_string(),
        check_oracle(&problem.manifold, &problem.objective, x, seed, opts)?,
    ));
    for (i, c) in problem.constraints.iter().enumerate() {
        out.push((
            format!("g[{i}]"),
            check_oracle(&problem.manifold, c, x, seed.wrapping_add(1000 + i as u64), opts)?,
        ));
    }
    Ok(out)
}
