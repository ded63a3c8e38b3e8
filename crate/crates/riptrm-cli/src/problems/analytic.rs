//! Closed-form sanity problem: minimize x subject to x >= 1 on the real
//! line. The KKT point is (x, lambda) = (1, 1) and the central path is
//! x(mu) = 1 + mu with lambda(mu) = 1.

use nalgebra::DVector;
use riptrm::{FunctionOracle, Manifold, Point, PrimalDualPair, RicoProblem};

pub fn build_analytic_1d() -> (RicoProblem, PrimalDualPair) {
    let objective = FunctionOracle::new(
        |x: &Point| x.coords[0],
        |_x: &Point| DVector::from_vec(vec![1.0]),
        |_x: &Point, _v: &DVector<f64>| DVector::zeros(1),
    );
    let constraint = FunctionOracle::new(
        |x: &Point| x.coords[0] - 1.0,
        |_x: &Point| DVector::from_vec(vec![1.0]),
        |_x: &Point, _v: &DVector<f64>| DVector::zeros(1),
    );
    let problem = RicoProblem::new(Manifold::Euclidean(1), objective, vec![constraint])
        .expect("valid 1-d problem");
    let w0 = PrimalDualPair::new(
        Point::new(DVector::from_vec(vec![2.0])),
        DVector::from_vec(vec![1.0]),
    );
    (problem, w0)
}
