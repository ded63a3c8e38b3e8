//! Rosenbrock-type objective on the Grassmann manifold with entrywise lower
//! bounds.
//!
//! The cost chains the row-major vectorization `v = vec(X)` of the
//! representative through `sum_m alpha (v_{m+1} - v_m)^2 + (1 - v_m)^2`,
//! which gives the Lagrangian Hessian a negative eigenvalue of order `alpha`
//! at the canonical initial point. Constraints are `X_ij - c >= 0` for every
//! entry, ordered row-major to match the vectorization.

use nalgebra::{DMatrix, DVector};
use riptrm::{Error, FunctionOracle, Manifold, Point, PrimalDualPair, RicoProblem};

#[derive(Debug, Clone, Copy)]
pub struct RosenbrockGrassmannSpec {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub c: f64,
}

impl Default for RosenbrockGrassmannSpec {
    fn default() -> Self {
        RosenbrockGrassmannSpec {
            n: 5,
            k: 3,
            alpha: 1e7,
            c: -0.01,
        }
    }
}

/// Row-major vectorization of the column-major ambient coordinates.
fn vec_rows(coords: &DVector<f64>, n: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(n * k, |m, _| coords[(m % k) * n + m / k])
}

/// Scatter a row-major vector gradient back into ambient coordinates.
fn scatter_rows(vgrad: &DVector<f64>, n: usize, k: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n * k);
    for m in 0..n * k {
        out[(m % k) * n + m / k] = vgrad[m];
    }
    out
}

pub fn build_rosenbrock_grassmann(
    spec: &RosenbrockGrassmannSpec,
) -> Result<(RicoProblem, PrimalDualPair), Error> {
    let RosenbrockGrassmannSpec { n, k, alpha, c } = *spec;
    if !(n > k && k >= 1) {
        return Err(Error::InvalidInput(format!(
            "rosenbrock-grassmann needs n > k >= 1, got ({n}, {k})"
        )));
    }
    if alpha <= 0.0 || alpha.is_nan() {
        return Err(Error::InvalidInput(format!(
            "rosenbrock-grassmann needs alpha > 0, got {alpha}"
        )));
    }
    let nk = n * k;

    let value = move |x: &Point| {
        let v = vec_rows(&x.coords, n, k);
        let mut total = 0.0;
        for m in 0..nk - 1 {
            let step = v[m + 1] - v[m];
            let off = 1.0 - v[m];
            total += alpha * step * step + off * off;
        }
        total
    };
    let egrad = move |x: &Point| {
        let v = vec_rows(&x.coords, n, k);
        let mut g = DVector::zeros(nk);
        for m in 0..nk - 1 {
            let step = v[m + 1] - v[m];
            g[m + 1] += 2.0 * alpha * step;
            g[m] -= 2.0 * alpha * step;
            g[m] -= 2.0 * (1.0 - v[m]);
        }
        scatter_rows(&g, n, k)
    };
    let ehess = move |_x: &Point, dv: &DVector<f64>| {
        let d = vec_rows(dv, n, k);
        let mut out = DVector::zeros(nk);
        for m in 0..nk - 1 {
            let step = d[m + 1] - d[m];
            out[m + 1] += 2.0 * alpha * step;
            out[m] -= 2.0 * alpha * step;
            out[m] += 2.0 * d[m];
        }
        scatter_rows(&out, n, k)
    };
    let objective = FunctionOracle::new(value, egrad, ehess);

    // one lower bound per entry, row-major
    let mut constraints = Vec::with_capacity(nk);
    for i in 0..n {
        for j in 0..k {
            let idx = j * n + i;
            constraints.push(FunctionOracle::new(
                move |x: &Point| x.coords[idx] - c,
                move |x: &Point| {
                    let mut g = DVector::zeros(x.coords.len());
                    g[idx] = 1.0;
                    g
                },
                move |_x: &Point, v: &DVector<f64>| DVector::zeros(v.len()),
            ));
        }
    }

    let manifold = Manifold::Grassmann { n, k };
    let problem = RicoProblem::new(manifold, objective, constraints)?;

    let mut x0 = DMatrix::zeros(n, k);
    for j in 0..k {
        x0[(j, j)] = 1.0;
    }
    let w0 = PrimalDualPair::new(
        Point::new(DVector::from_column_slice(x0.as_slice())),
        DVector::from_element(nk, 1.0),
    );
    Ok((problem, w0))
}
