//! Interior-point search: Riemannian gradient descent with Armijo
//! backtracking on the hinge penalty `psi(x) = sum_i max(0, 2 tol - g_i)^2`,
//! restarted from seeded random samples until `min_i g_i(x) >= tol`.

use riptrm::{Error, Point, RicoProblem};

const MAX_RESTARTS: usize = 50;
const MAX_ITERS: usize = 500;
const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

fn penalty(problem: &RicoProblem, x: &Point, margin: f64) -> f64 {
    problem
        .constraint_values(x)
        .iter()
        .map(|&g| (margin - g).max(0.0).powi(2))
        .sum()
}

fn penalty_egrad(problem: &RicoProblem, x: &Point, margin: f64) -> nalgebra::DVector<f64> {
    let mut out = nalgebra::DVector::zeros(problem.manifold.ambient_dim());
    for c in &problem.constraints {
        let slack = margin - c.value(x);
        if slack > 0.0 {
            out += c.egrad(x) * (-2.0 * slack);
        }
    }
    out
}

/// Find a point with `min_i g_i(x) >= tol`. A warm start that already
/// qualifies is returned unchanged; otherwise it seeds the first descent.
pub fn find_interior_point(
    problem: &RicoProblem,
    seed: u64,
    tol: f64,
    warm_start: Option<&Point>,
) -> Result<Point, Error> {
    let qualified = |x: &Point| {
        problem
            .constraint_values(x)
            .iter()
            .all(|&g| g >= tol)
    };
    if problem.num_constraints() == 0 {
        return Ok(warm_start
            .cloned()
            .unwrap_or_else(|| problem.manifold.sample_point(seed)));
    }
    if let Some(x) = warm_start {
        if qualified(x) {
            return Ok(x.clone());
        }
    }
    let margin = 2.0 * tol;

    for restart in 0..MAX_RESTARTS {
        let mut x = match (restart, warm_start) {
            (0, Some(w)) => w.clone(),
            _ => problem.manifold.sample_point(seed.wrapping_add(restart as u64)),
        };
        let mut psi = penalty(problem, &x, margin);
        for _ in 0..MAX_ITERS {
            if qualified(&x) {
                return Ok(x);
            }
            let grad = problem.manifold.egrad_to_rgrad(&x, &penalty_egrad(problem, &x, margin))?;
            let gn2 = problem.manifold.inner(&x, &grad, &grad)?;
            if gn2 <= 1e-28 {
                break; // flat spot; restart elsewhere
            }
            let mut alpha = 1.0;
            let mut advanced = false;
            while alpha >= MIN_STEP {
                let candidate = problem.manifold.retract(&x, &grad.scaled(-alpha))?;
                let psi_new = penalty(problem, &candidate, margin);
                if psi_new <= psi - ARMIJO_C * alpha * gn2 {
                    x = candidate;
                    psi = psi_new;
                    advanced = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        if qualified(&x) {
            return Ok(x);
        }
    }
    Err(Error::FeasibilityFailure(format!(
        "no interior point with margin {tol} found after {MAX_RESTARTS} restarts"
    )))
}
