//! Seeded synthetic problem instances for tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FunctionOracle, PrimalDualPair, RicoProblem};
use crate::manifold::{gaussian_matrix, gaussian_vector, Manifold, Point};

/// Oracle for `f(x) = 0.5 x^T S x + a^T x + c` with exact derivatives.
pub fn quadratic_oracle(s: DMatrix<f64>, a: DVector<f64>, c: f64) -> FunctionOracle {
    let s_val = s.clone();
    let s_grad = s.clone();
    let a_val = a.clone();
    let a_grad = a;
    FunctionOracle::new(
        move |x: &Point| 0.5 * (&s_val * &x.coords).dot(&x.coords) + a_val.dot(&x.coords) + c,
        move |x: &Point| &s_grad * &x.coords + &a_grad,
        move |_x: &Point, v: &DVector<f64>| &s * v,
    )
}

/// Random inequality-constrained quadratic problem on `Euclidean(dim)` with
/// `m` constraints, plus a strictly feasible primal-dual anchor: constraint
/// values at the anchor lie in `[0.75, 1.25]` and multipliers in `[0.5, 1.5]`.
///
/// Objective and constraint Hessians are generically indefinite. Identical
/// seeds produce identical instances.
pub fn random_quadratic_problem(seed: u64, dim: usize, m: usize) -> (RicoProblem, PrimalDualPair) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let manifold = Manifold::Euclidean(dim);
    let anchor = gaussian_vector(&mut rng, dim) * 0.5;

    let p_raw = gaussian_matrix(&mut rng, dim, dim);
    let p_sym = (&p_raw + p_raw.transpose()) * 0.5;
    let q = gaussian_vector(&mut rng, dim);
    let objective = quadratic_oracle(p_sym, q, 0.0);

    let mut constraints = Vec::with_capacity(m);
    let mut lambda = DVector::zeros(m);
    for i in 0..m {
        let s_raw = gaussian_matrix(&mut rng, dim, dim) * 0.3;
        let s_sym = (&s_raw + s_raw.transpose()) * 0.5;
        let a = gaussian_vector(&mut rng, dim);
        let at_anchor = 0.5 * (&s_sym * &anchor).dot(&anchor) + a.dot(&anchor);
        let target: f64 = 0.75 + 0.5 * rng.gen::<f64>();
        constraints.push(quadratic_oracle(s_sym, a, target - at_anchor));
        lambda[i] = 0.5 + rng.gen::<f64>();
    }

    let problem = RicoProblem::new(manifold, objective, constraints)
        .expect("euclidean manifold is always valid");
    let w0 = PrimalDualPair::new(Point::new(anchor), lambda);
    (problem, w0)
}
