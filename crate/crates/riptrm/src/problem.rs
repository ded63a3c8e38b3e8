//! Inequality-constrained problem container and the derived quantities the
//! solver consumes: Lagrangian derivatives, the condensed Newton operator,
//! barrier gradients, the log-barrier merit function, KKT residuals, and the
//! second-order stationarity measure.
//!
//! Objectives and constraints are supplied as [`FunctionOracle`]s: a value,
//! an ambient-space gradient of a smooth extension, and the directional
//! derivative of that gradient. Conversion to Riemannian gradients and
//! Hessians happens here through the manifold.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg;
use crate::manifold::{Manifold, Point, Tangent};

pub mod synthetic;

/// Values of `g` below this are treated as a strict-feasibility violation in
/// barrier quantities rather than being allowed to produce infinities.
pub const DIVISION_GUARD: f64 = 1e-300;

/// Default activity threshold for the second-order stationarity measure.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-6;

type ValueFn = dyn Fn(&Point) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Point) -> DVector<f64> + Send + Sync;
type HessFn = dyn Fn(&Point, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// A twice-differentiable function given by its smooth ambient extension.
pub struct FunctionOracle {
    value: Box<ValueFn>,
    egrad: Box<GradFn>,
    ehess: Box<HessFn>,
}

impl FunctionOracle {
    pub fn new(
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        egrad: impl Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
        ehess: impl Fn(&Point, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        FunctionOracle {
            value: Box::new(value),
            egrad: Box::new(egrad),
            ehess: Box::new(ehess),
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    /// Ambient gradient of the smooth extension.
    pub fn egrad(&self, x: &Point) -> DVector<f64> {
        (self.egrad)(x)
    }

    /// Directional derivative of the ambient gradient along `v` (ambient).
    pub fn ehess_apply(&self, x: &Point, v: &DVector<f64>) -> DVector<f64> {
        (self.ehess)(x, v)
    }
}

impl std::fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FunctionOracle")
    }
}

/// Primal-dual iterate: a point on the manifold and a multiplier vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPair {
    pub x: Point,
    pub lambda: DVector<f64>,
}

impl PrimalDualPair {
    pub fn new(x: Point, lambda: DVector<f64>) -> Self {
        PrimalDualPair { x, lambda }
    }
}

/// Componentwise breakdown of the KKT residual. All components are norms;
/// `total` is the Euclidean norm of the concatenation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBreakdown {
    pub grad_lag_norm: f64,
    pub dual_neg: f64,
    pub primal_neg: f64,
    pub compl: f64,
    pub manvio: f64,
    pub total: f64,
}

/// The problem `min f(x)` over `x` in `M` subject to `g_i(x) >= 0`.
#[derive(Debug)]
pub struct RicoProblem {
    pub manifold: Manifold,
    pub objective: FunctionOracle,
    pub constraints: Vec<FunctionOracle>,
}

impl RicoProblem {
    pub fn new(
        manifold: Manifold,
        objective: FunctionOracle,
        constraints: Vec<FunctionOracle>,
    ) -> Result<Self, Error> {
        manifold.validate()?;
        Ok(RicoProblem {
            manifold,
            objective,
            constraints,
        })
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// g(x), componentwise.
    pub fn constraint_values(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.value(x)),
        )
    }

    /// True iff every g_i(x) > 0 (strict sign test, no tolerance).
    pub fn strict_feasible(&self, x: &Point) -> bool {
        self.constraints.iter().all(|c| c.value(x) > 0.0)
    }

    pub fn objective_value(&self, x: &Point) -> f64 {
        self.objective.value(x)
    }

    /// Riemannian gradient of the objective.
    pub fn grad_objective(&self, x: &Point) -> Result<Tangent, Error> {
        self.manifold.egrad_to_rgrad(x, &self.objective.egrad(x))
    }

    /// Riemannian gradient of the Lagrangian at `w`.
    pub fn grad_lagrangian(&self, w: &PrimalDualPair) -> Result<Tangent, Error> {
        let mut combined = self.objective.egrad(&w.x);
        for (c, &li) in self.constraints.iter().zip(w.lambda.iter()) {
            combined -= c.egrad(&w.x) * li;
        }
        self.manifold.egrad_to_rgrad(&w.x, &combined)
    }

    /// Riemannian Hessian of the Lagrangian applied to `v`.
    pub fn hess_lagrangian_apply(
        &self,
        w: &PrimalDualPair,
        v: &Tangent,
    ) -> Result<Tangent, Error> {
        LagrangianOperator::new(self, w)?.hess_lagrangian(v)
    }

    /// Condensed Newton operator applied to `v`.
    pub fn condensed_apply(&self, w: &PrimalDualPair, v: &Tangent) -> Result<Tangent, Error> {
        LagrangianOperator::new(self, w)?.condensed(v)
    }

    /// Gradient of the log-barrier merit function:
    /// `grad f - mu * sum_i (1/g_i) grad g_i`. With `mu == 0` this is
    /// exactly the objective gradient.
    pub fn barrier_gradient(&self, x: &Point, mu: f64) -> Result<Tangent, Error> {
        if mu < 0.0 {
            return Err(Error::InvalidInput(format!("negative barrier mu = {mu}")));
        }
        if mu == 0.0 {
            return self.grad_objective(x);
        }
        let mut combined = self.objective.egrad(x);
        for (i, c) in self.constraints.iter().enumerate() {
            let gi = c.value(x);
            if gi < DIVISION_GUARD {
                return Err(Error::NotStrictlyFeasible {
                    index: i,
                    value: gi,
                });
            }
            combined -= c.egrad(x) * (mu / gi);
        }
        self.manifold.egrad_to_rgrad(x, &combined)
    }

    /// Barrier KKT vector field: `(grad_x L(w), diag(lambda) g(x) - mu 1)`.
    /// With `mu == 0` the pair measures plain KKT stationarity.
    pub fn barrier_kkt_field(
        &self,
        w: &PrimalDualPair,
        mu: f64,
    ) -> Result<(Tangent, DVector<f64>), Error> {
        let grad = self.grad_lagrangian(w)?;
        let g = self.constraint_values(&w.x);
        let compl = DVector::from_iterator(
            g.len(),
            g.iter().zip(w.lambda.iter()).map(|(&gi, &li)| li * gi - mu),
        );
        Ok((grad, compl))
    }

    /// Log-barrier merit function `f(x) - mu * sum_i log g_i(x)`.
    pub fn merit(&self, x: &Point, mu: f64) -> Result<f64, Error> {
        if mu < 0.0 {
            return Err(Error::InvalidInput(format!("negative barrier mu = {mu}")));
        }
        let mut total = self.objective.value(x);
        for (i, c) in self.constraints.iter().enumerate() {
            let gi = c.value(x);
            if gi < DIVISION_GUARD {
                return Err(Error::NotStrictlyFeasible {
                    index: i,
                    value: gi,
                });
            }
            if mu > 0.0 {
                total -= mu * gi.ln();
            }
        }
        Ok(total)
    }

    /// KKT residual with manifold-violation term. Never fails: quantities
    /// that are undefined off the manifold are reported as infinite.
    pub fn kkt_residual(&self, w: &PrimalDualPair) -> ResidualBreakdown {
        let grad_lag_norm = self
            .grad_lagrangian(w)
            .and_then(|t| self.manifold.norm(&w.x, &t))
            .unwrap_or(f64::INFINITY);
        self.residual_from(w, grad_lag_norm)
    }

    /// Minimum eigenvalue of the Lagrangian Hessian restricted to the weak
    /// critical cone (tangent directions orthogonal to all active constraint
    /// gradients). Returns `+inf` when the cone is trivial.
    ///
    /// A constraint counts as active when `g_i(x) < active_tol`.
    pub fn second_order_measure(&self, w: &PrimalDualPair, active_tol: f64) -> Result<f64, Error> {
        if self.manifold.dim() == 0 {
            return Ok(f64::INFINITY);
        }
        let op = LagrangianOperator::new(self, w)?;
        let basis = self.manifold.tangent_basis(&w.x)?;
        let (hl, a) = self.hessian_matrices(&op, &basis)?;
        self.cone_min_eig(&op, &basis, &hl, &a, active_tol)
    }

    /// Tangent-basis matrices of the Lagrangian Hessian (symmetrized) and of
    /// the constraint gradients.
    fn hessian_matrices(
        &self,
        op: &LagrangianOperator,
        basis: &[Tangent],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), Error> {
        let d = basis.len();
        let m = self.constraints.len();
        let mut hl = DMatrix::zeros(d, d);
        for j in 0..d {
            let hbj = op.hess_lagrangian(&basis[j])?;
            for (i, b) in basis.iter().enumerate() {
                hl[(i, j)] = self.manifold.inner(&op.x, &hbj, b)?;
            }
        }
        let hl = (&hl + hl.transpose()) * 0.5;
        let mut a = DMatrix::zeros(m, d);
        for i in 0..m {
            for (j, b) in basis.iter().enumerate() {
                a[(i, j)] = self.manifold.inner(&op.x, &op.cons_rgrads[i], b)?;
            }
        }
        Ok((hl, a))
    }

    fn cone_min_eig(
        &self,
        op: &LagrangianOperator,
        basis: &[Tangent],
        hl: &DMatrix<f64>,
        a: &DMatrix<f64>,
        active_tol: f64,
    ) -> Result<f64, Error> {
        let d = basis.len();
        let active: Vec<usize> = (0..op.g.len()).filter(|&i| op.g[i] < active_tol).collect();
        let restricted = if active.is_empty() {
            hl.clone()
        } else {
            let mut a_act = DMatrix::zeros(active.len(), d);
            for (row, &i) in active.iter().enumerate() {
                a_act.row_mut(row).copy_from(&a.row(i));
            }
            let gram = a_act.transpose() * &a_act;
            let eig = linalg::sym_eig(&gram)?;
            let lmax = eig.values[d - 1].max(0.0);
            let null_tol = 1e-10 * lmax.max(1.0);
            let null_cols: Vec<usize> = (0..d).filter(|&j| eig.values[j] <= null_tol).collect();
            if null_cols.is_empty() {
                return Ok(f64::INFINITY);
            }
            let mut n = DMatrix::zeros(d, null_cols.len());
            for (dst, &src) in null_cols.iter().enumerate() {
                n.set_column(dst, &eig.vectors.column(src));
            }
            n.transpose() * hl * &n
        };
        Ok(linalg::sym_eig(&restricted)?.values[0])
    }

    /// Everything the per-iteration telemetry needs in one pass over the
    /// oracles: KKT residual breakdown, the smallest eigenvalue of the
    /// condensed operator (when the iterate allows it), and the second-order
    /// stationarity measure.
    pub fn stationarity_report(
        &self,
        w: &PrimalDualPair,
        active_tol: f64,
    ) -> Result<StationarityReport, Error> {
        let op = LagrangianOperator::new(self, w)?;
        let grad_lag_norm = self
            .manifold
            .norm(&w.x, &op.grad_lagrangian()?)
            .unwrap_or(f64::INFINITY);
        let residual = self.residual_from(w, grad_lag_norm);

        if self.manifold.dim() == 0 {
            return Ok(StationarityReport {
                residual,
                min_eig_condensed: None,
                second_order: f64::INFINITY,
            });
        }
        let basis = self.manifold.tangent_basis(&w.x)?;
        let (hl, a) = self.hessian_matrices(&op, &basis)?;

        let positive = op.g.iter().all(|&gi| gi >= DIVISION_GUARD)
            && op.lambda.iter().all(|&li| li > 0.0);
        let min_eig_condensed = if positive {
            let m = op.g.len();
            let scaled = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    op.lambda[i] / op.g[i]
                } else {
                    0.0
                }
            });
            let condensed = &hl + a.transpose() * scaled * &a;
            Some(linalg::sym_eig(&((&condensed + condensed.transpose()) * 0.5))?.values[0])
        } else {
            None
        };
        let second_order = self.cone_min_eig(&op, &basis, &hl, &a, active_tol)?;
        Ok(StationarityReport {
            residual,
            min_eig_condensed,
            second_order,
        })
    }

    fn residual_from(&self, w: &PrimalDualPair, grad_lag_norm: f64) -> ResidualBreakdown {
        let g = self.constraint_values(&w.x);
        let mut dual_sq = 0.0;
        let mut primal_sq = 0.0;
        let mut compl_sq = 0.0;
        for (&gi, &li) in g.iter().zip(w.lambda.iter()) {
            dual_sq += li.min(0.0).powi(2);
            primal_sq += gi.min(0.0).powi(2);
            compl_sq += (li * gi).powi(2);
        }
        let manvio = self.manifold.membership_defect(&w.x);
        let total =
            (grad_lag_norm.powi(2) + dual_sq + primal_sq + compl_sq + manvio.powi(2)).sqrt();
        ResidualBreakdown {
            grad_lag_norm,
            dual_neg: dual_sq.sqrt(),
            primal_neg: primal_sq.sqrt(),
            compl: compl_sq.sqrt(),
            manvio,
            total,
        }
    }
}

/// Output of [`RicoProblem::stationarity_report`].
#[derive(Debug, Clone, Copy)]
pub struct StationarityReport {
    pub residual: ResidualBreakdown,
    /// Smallest eigenvalue of the condensed operator; absent when the
    /// iterate is not strictly feasible with positive multipliers.
    pub min_eig_condensed: Option<f64>,
    pub second_order: f64,
}

/// Per-iterate cache of constraint values and gradients; applies the
/// Lagrangian Hessian and the condensed operator without re-evaluating
/// first-order oracle data.
pub struct LagrangianOperator<'a> {
    problem: &'a RicoProblem,
    pub x: Point,
    pub lambda: DVector<f64>,
    /// Constraint values g(x).
    pub g: DVector<f64>,
    /// Ambient gradient of the Lagrangian.
    pub lag_egrad: DVector<f64>,
    /// Ambient constraint gradients.
    pub cons_egrads: Vec<DVector<f64>>,
    /// Riemannian constraint gradients.
    pub cons_rgrads: Vec<Tangent>,
}

impl<'a> LagrangianOperator<'a> {
    pub fn new(problem: &'a RicoProblem, w: &PrimalDualPair) -> Result<Self, Error> {
        if w.lambda.len() != problem.num_constraints() {
            return Err(Error::InvalidInput(format!(
                "multiplier length {} does not match constraint count {}",
                w.lambda.len(),
                problem.num_constraints()
            )));
        }
        let g = problem.constraint_values(&w.x);
        let mut lag_egrad = problem.objective.egrad(&w.x);
        let mut cons_egrads = Vec::with_capacity(problem.constraints.len());
        let mut cons_rgrads = Vec::with_capacity(problem.constraints.len());
        for (c, &li) in problem.constraints.iter().zip(w.lambda.iter()) {
            let eg = c.egrad(&w.x);
            lag_egrad -= &eg * li;
            cons_rgrads.push(problem.manifold.egrad_to_rgrad(&w.x, &eg)?);
            cons_egrads.push(eg);
        }
        Ok(LagrangianOperator {
            problem,
            x: w.x.clone(),
            lambda: w.lambda.clone(),
            g,
            lag_egrad,
            cons_egrads,
            cons_rgrads,
        })
    }

    pub fn grad_lagrangian(&self) -> Result<Tangent, Error> {
        self.problem
            .manifold
            .egrad_to_rgrad(&self.x, &self.lag_egrad)
    }

    /// Hess_x L(w)[v].
    pub fn hess_lagrangian(&self, v: &Tangent) -> Result<Tangent, Error> {
        let mut ehess_v = self.problem.objective.ehess_apply(&self.x, &v.ambient);
        for (c, &li) in self.problem.constraints.iter().zip(self.lambda.iter()) {
            ehess_v -= c.ehess_apply(&self.x, &v.ambient) * li;
        }
        self.problem
            .manifold
            .ehess_to_rhess(&self.x, &self.lag_egrad, &ehess_v, v)
    }

    /// Condensed operator `H(w)[v] = Hess_x L[v] + sum_i (lambda_i / g_i)
    /// <grad g_i, v> grad g_i`. Requires strict feasibility and positive
    /// multipliers.
    pub fn condensed(&self, v: &Tangent) -> Result<Tangent, Error> {
        for (i, (&gi, &li)) in self.g.iter().zip(self.lambda.iter()).enumerate() {
            if gi < DIVISION_GUARD {
                return Err(Error::InvalidState(format!(
                    "condensed operator needs strict feasibility: g[{i}] = {gi:.3e}"
                )));
            }
            if li <= 0.0 {
                return Err(Error::InvalidState(format!(
                    "condensed operator needs positive multipliers: lambda[{i}] = {li:.3e}"
                )));
            }
        }
        let mut out = self.hess_lagrangian(v)?;
        for (i, gi) in self.cons_rgrads.iter().enumerate() {
            let coef =
                self.lambda[i] / self.g[i] * self.problem.manifold.inner(&self.x, gi, v)?;
            out = out.add_scaled(coef, gi);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold::*;

    fn linear_1d(slope: f64, offset: f64) -> FunctionOracle {
        FunctionOracle::new(
            move |x: &Point| slope * x.coords[0] + offset,
            move |_x: &Point| DVector::from_vec(vec![slope]),
            move |_x: &Point, _v: &DVector<f64>| DVector::zeros(1),
        )
    }

    fn problem_1d(f: FunctionOracle, gs: Vec<FunctionOracle>) -> RicoProblem {
        RicoProblem::new(Euclidean(1), f, gs).unwrap()
    }

    fn point1(v: f64) -> Point {
        Point::new(DVector::from_vec(vec![v]))
    }

    #[test]
    fn constraint_values_empty_when_unconstrained() {
        let p = problem_1d(linear_1d(1.0, 0.0), vec![]);
        assert_eq!(p.constraint_values(&point1(2.0)).len(), 0);
        assert!(p.strict_feasible(&point1(2.0)));
    }

    #[test]
    fn grad_lagrangian_reduces_to_objective_gradient() {
        let p = problem_1d(linear_1d(3.0, 0.0), vec![linear_1d(1.0, -1.0)]);
        let w = PrimalDualPair::new(point1(2.0), DVector::zeros(1));
        let g = p.grad_lagrangian(&w).unwrap();
        assert_eq!(g.ambient[0], 3.0);
    }

    #[test]
    fn grad_lagrangian_cancels_when_constraint_equals_objective() {
        let p = problem_1d(linear_1d(3.0, 0.5), vec![linear_1d(3.0, 0.5)]);
        let w = PrimalDualPair::new(point1(1.0), DVector::from_vec(vec![1.0]));
        let g = p.grad_lagrangian(&w).unwrap();
        assert_eq!(g.ambient[0], 0.0);
    }

    #[test]
    fn grad_lagrangian_matches_finite_differences() {
        let (p, w0) = synthetic::random_quadratic_problem(42, 4, 3);
        let x = w0.x;
        let lambda = DVector::from_vec(vec![0.4, 1.1, 0.8]);
        let w = PrimalDualPair::new(x.clone(), lambda.clone());
        let g = p.grad_lagrangian(&w).unwrap();
        let lag = |y: &Point| {
            p.objective.value(y)
                - p.constraints
                    .iter()
                    .zip(lambda.iter())
                    .map(|(c, &li)| li * c.value(y))
                    .sum::<f64>()
        };
        for seed in 0..3 {
            let v = p.manifold.sample_tangent(&x, seed).unwrap();
            let ip = p.manifold.inner(&x, &g, &v).unwrap();
            let h = 1e-5;
            let fp = lag(&p.manifold.retract(&x, &v.scaled(h)).unwrap());
            let fm = lag(&p.manifold.retract(&x, &v.scaled(-h)).unwrap());
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - ip).abs() <= 1e-5 * (1.0 + ip.abs().max(fd.abs())));
        }
    }

    #[test]
    fn hess_lagrangian_is_self_adjoint() {
        let (p, _) = synthetic::random_quadratic_problem(7, 5, 2);
        let x = p.manifold.sample_point(2);
        let w = PrimalDualPair::new(x.clone(), DVector::from_vec(vec![0.7, 1.3]));
        let u = p.manifold.sample_tangent(&x, 3).unwrap();
        let v = p.manifold.sample_tangent(&x, 4).unwrap();
        let hu = p.hess_lagrangian_apply(&w, &u).unwrap();
        let hv = p.hess_lagrangian_apply(&w, &v).unwrap();
        let a = p.manifold.inner(&x, &hu, &v).unwrap();
        let b = p.manifold.inner(&x, &u, &hv).unwrap();
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn hess_lagrangian_matches_second_directional_derivative() {
        let (p, _) = synthetic::random_quadratic_problem(9, 3, 2);
        let x = p.manifold.sample_point(5);
        let lambda = DVector::from_vec(vec![0.9, 0.2]);
        let w = PrimalDualPair::new(x.clone(), lambda.clone());
        let v = p.manifold.sample_tangent(&x, 6).unwrap();
        let hv = p.hess_lagrangian_apply(&w, &v).unwrap();
        let quad = p.manifold.inner(&x, &hv, &v).unwrap();
        let lag = |y: &Point| {
            p.objective.value(y)
                - p.constraints
                    .iter()
                    .zip(lambda.iter())
                    .map(|(c, &li)| li * c.value(y))
                    .sum::<f64>()
        };
        let h = 1e-4;
        let l0 = lag(&x);
        let lp = lag(&p.manifold.retract(&x, &v.scaled(h)).unwrap());
        let lm = lag(&p.manifold.retract(&x, &v.scaled(-h)).unwrap());
        let fd = (lp - 2.0 * l0 + lm) / (h * h);
        assert!((fd - quad).abs() <= 1e-5 * (1.0 + quad.abs()));
    }

    #[test]
    fn barrier_gradient_with_zero_mu_is_objective_gradient() {
        let p = problem_1d(linear_1d(2.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        let x = point1(2.0);
        let bg = p.barrier_gradient(&x, 0.0).unwrap();
        let og = p.grad_objective(&x).unwrap();
        assert_eq!(bg.ambient, og.ambient);
    }

    #[test]
    fn barrier_gradient_hand_example() {
        // f = 0, g(x) = x, mu = 1, x = 2: gradient is -mu/x = -0.5
        let p = problem_1d(linear_1d(0.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        let bg = p.barrier_gradient(&point1(2.0), 1.0).unwrap();
        assert!((bg.ambient[0] - (-0.5)).abs() <= 1e-15);
    }

    #[test]
    fn barrier_gradient_matches_merit_finite_differences() {
        let (p, w0) = synthetic::random_quadratic_problem(11, 4, 3);
        let x = w0.x;
        assert!(p.strict_feasible(&x));
        let mu = 0.3;
        let bg = p.barrier_gradient(&x, mu).unwrap();
        for seed in 0..3 {
            let v = p.manifold.sample_tangent(&x, 20 + seed).unwrap();
            let ip = p.manifold.inner(&x, &bg, &v).unwrap();
            let h = 1e-5;
            let fp = p
                .merit(&p.manifold.retract(&x, &v.scaled(h)).unwrap(), mu)
                .unwrap();
            let fm = p
                .merit(&p.manifold.retract(&x, &v.scaled(-h)).unwrap(), mu)
                .unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - ip).abs() <= 1e-5 * (1.0 + ip.abs().max(fd.abs())));
        }
    }

    #[test]
    fn barrier_gradient_rejects_infeasible_points() {
        let p = problem_1d(linear_1d(0.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        assert!(matches!(
            p.barrier_gradient(&point1(-1.0), 1.0),
            Err(Error::NotStrictlyFeasible { .. })
        ));
        assert!(matches!(
            p.barrier_gradient(&point1(0.0), 1.0),
            Err(Error::NotStrictlyFeasible { .. })
        ));
    }

    #[test]
    fn condensed_reduces_to_hessian_without_constraints() {
        let (p, _) = synthetic::random_quadratic_problem(13, 3, 0);
        let x = p.manifold.sample_point(4);
        let w = PrimalDualPair::new(x.clone(), DVector::zeros(0));
        let v = p.manifold.sample_tangent(&x, 5).unwrap();
        let hv = p.hess_lagrangian_apply(&w, &v).unwrap();
        let cv = p.condensed_apply(&w, &v).unwrap();
        assert_eq!(hv.ambient, cv.ambient);
    }

    #[test]
    fn condensed_hand_example() {
        // f = 0, g(x) = x, lambda = 1, x = 2: H[v] = (lambda/g) g'^2 v = 0.5 v
        let p = problem_1d(linear_1d(0.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        let x = point1(2.0);
        let w = PrimalDualPair::new(x.clone(), DVector::from_vec(vec![1.0]));
        let v = Tangent::new(&x, DVector::from_vec(vec![2.0]));
        let hv = p.condensed_apply(&w, &v).unwrap();
        assert!((hv.ambient[0] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn condensed_is_hessian_plus_rank_m_correction() {
        let (p, w0) = synthetic::random_quadratic_problem(17, 5, 4);
        let x = w0.x;
        let lambda = DVector::from_vec(vec![0.5, 1.2, 0.3, 2.0]);
        let w = PrimalDualPair::new(x.clone(), lambda.clone());
        let op = LagrangianOperator::new(&p, &w).unwrap();
        let v = p.manifold.sample_tangent(&x, 7).unwrap();
        let direct = op.condensed(&v).unwrap();
        let mut rebuilt = op.hess_lagrangian(&v).unwrap();
        for (i, gi) in op.cons_rgrads.iter().enumerate() {
            let coef = lambda[i] / op.g[i] * p.manifold.inner(&x, gi, &v).unwrap();
            rebuilt = rebuilt.add_scaled(coef, gi);
        }
        assert!((&direct.ambient - &rebuilt.ambient).norm() <= 1e-10);
    }

    #[test]
    fn condensed_is_self_adjoint() {
        let (p, w0) = synthetic::random_quadratic_problem(19, 6, 3);
        let x = w0.x;
        let w = PrimalDualPair::new(x.clone(), DVector::from_vec(vec![1.0, 0.4, 0.9]));
        let op = LagrangianOperator::new(&p, &w).unwrap();
        let u = p.manifold.sample_tangent(&x, 9).unwrap();
        let v = p.manifold.sample_tangent(&x, 10).unwrap();
        let a = p
            .manifold
            .inner(&x, &op.condensed(&u).unwrap(), &v)
            .unwrap();
        let b = p
            .manifold
            .inner(&x, &u, &op.condensed(&v).unwrap())
            .unwrap();
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn condensed_rejects_bad_state() {
        let p = problem_1d(linear_1d(0.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        let x = point1(-1.0);
        let w = PrimalDualPair::new(x.clone(), DVector::from_vec(vec![1.0]));
        let v = Tangent::new(&x, DVector::from_vec(vec![1.0]));
        assert!(matches!(
            p.condensed_apply(&w, &v),
            Err(Error::InvalidState(_))
        ));
        let x = point1(2.0);
        let w = PrimalDualPair::new(x.clone(), DVector::from_vec(vec![-0.5]));
        let v = Tangent::new(&x, DVector::from_vec(vec![1.0]));
        assert!(matches!(
            p.condensed_apply(&w, &v),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn barrier_kkt_field_vanishes_on_the_central_path() {
        // f(x) = x, g(x) = x - 1: central path x = 1 + mu with lambda = 1.
        let p = problem_1d(linear_1d(1.0, 0.0), vec![linear_1d(1.0, -1.0)]);
        let mu = 0.5;
        let w = PrimalDualPair::new(point1(1.0 + mu), DVector::from_vec(vec![1.0]));
        let (grad, compl) = p.barrier_kkt_field(&w, mu).unwrap();
        assert!(grad.ambient.norm() <= 1e-15);
        assert!(compl.norm() <= 1e-15);
        // mu = 0 at the KKT point (1, 1)
        let w = PrimalDualPair::new(point1(1.0), DVector::from_vec(vec![1.0]));
        let (grad, compl) = p.barrier_kkt_field(&w, 0.0).unwrap();
        assert!(grad.ambient.norm() <= 1e-15);
        assert!(compl.norm() <= 1e-15);
    }

    #[test]
    fn merit_examples() {
        // all g_i = 1: merit equals f
        let p = problem_1d(linear_1d(2.0, 1.0), vec![linear_1d(0.0, 1.0)]);
        let x = point1(3.0);
        assert_eq!(p.merit(&x, 0.7).unwrap(), p.objective.value(&x));

        // f(x) = x, g(x) = x, mu = 1, x = e: e - 1
        let p = problem_1d(linear_1d(1.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        let e = std::f64::consts::E;
        assert!((p.merit(&point1(e), 1.0).unwrap() - (e - 1.0)).abs() <= 1e-14);

        // f = 0, g = (e, e^2), mu = 0.5: -1.5
        let p = problem_1d(
            linear_1d(0.0, 0.0),
            vec![linear_1d(0.0, e), linear_1d(0.0, e * e)],
        );
        assert!((p.merit(&point1(0.0), 0.5).unwrap() - (-1.5)).abs() <= 1e-14);
    }

    #[test]
    fn merit_rejects_boundary_points() {
        let p = problem_1d(linear_1d(1.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        assert!(p.merit(&point1(0.0), 0.5).is_err());
    }

    #[test]
    fn kkt_residual_zero_at_kkt_point() {
        let p = problem_1d(linear_1d(1.0, 0.0), vec![linear_1d(1.0, -1.0)]);
        let w = PrimalDualPair::new(point1(1.0), DVector::from_vec(vec![1.0]));
        let r = p.kkt_residual(&w);
        assert_eq!(r.total, 0.0);
        assert_eq!(r.grad_lag_norm, 0.0);
        assert_eq!(r.manvio, 0.0);
    }

    #[test]
    fn kkt_residual_hand_example() {
        // f(x) = -x, g(x) = x, lambda = -1 at x = 1:
        // grad L = -1 - (-1)(1) = 0, min(0,lambda)^2 = 1, (lambda g)^2 = 1.
        let p = problem_1d(linear_1d(-1.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        let w = PrimalDualPair::new(point1(1.0), DVector::from_vec(vec![-1.0]));
        let r = p.kkt_residual(&w);
        assert!((r.total - 2f64.sqrt()).abs() <= 1e-15);
        assert_eq!(r.dual_neg, 1.0);
        assert_eq!(r.compl, 1.0);
        assert_eq!(r.primal_neg, 0.0);
    }

    #[test]
    fn kkt_residual_infinite_on_indefinite_spd_slot() {
        let m = SymmetricPositiveDefinite(2);
        let f = FunctionOracle::new(
            |_x: &Point| 0.0,
            |x: &Point| DVector::zeros(x.coords.len()),
            |_x: &Point, v: &DVector<f64>| DVector::zeros(v.len()),
        );
        let p = RicoProblem::new(m, f, vec![]).unwrap();
        let x = Point::new(DVector::from_vec(vec![1.0, 0.0, 0.0, -0.5]));
        let w = PrimalDualPair::new(x, DVector::zeros(0));
        let r = p.kkt_residual(&w);
        assert!(r.manvio.is_infinite());
        assert!(r.total.is_infinite());
    }

    #[test]
    fn second_order_measure_without_active_constraints() {
        // Unconstrained quadratic: the measure is the smallest eigenvalue of
        // the Hessian over the full tangent space.
        let (p, _) = synthetic::random_quadratic_problem(23, 4, 0);
        let x = p.manifold.sample_point(12);
        let w = PrimalDualPair::new(x.clone(), DVector::zeros(0));
        let measure = p.second_order_measure(&w, DEFAULT_ACTIVE_TOL).unwrap();
        let basis = p.manifold.tangent_basis(&x).unwrap();
        let d = basis.len();
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let hb = p.hess_lagrangian_apply(&w, &basis[j]).unwrap();
            for i in 0..d {
                h[(i, j)] = p.manifold.inner(&x, &hb, &basis[i]).unwrap();
            }
        }
        let eig = linalg::sym_eig(&((&h + h.transpose()) * 0.5)).unwrap();
        assert!((measure - eig.values[0]).abs() <= 1e-10 * (1.0 + eig.values[0].abs()));
    }

    #[test]
    fn second_order_measure_degenerate_cone_is_infinite() {
        // g_1 = x_1, g_2 = x_2 active at the origin: their gradients span
        // the tangent space, so the cone is trivial.
        let f = FunctionOracle::new(
            |x: &Point| x.coords[0] + x.coords[1],
            |_x: &Point| DVector::from_vec(vec![1.0, 1.0]),
            |_x: &Point, _v: &DVector<f64>| DVector::zeros(2),
        );
        let g1 = FunctionOracle::new(
            |x: &Point| x.coords[0],
            |_x: &Point| DVector::from_vec(vec![1.0, 0.0]),
            |_x: &Point, _v: &DVector<f64>| DVector::zeros(2),
        );
        let g2 = FunctionOracle::new(
            |x: &Point| x.coords[1],
            |_x: &Point| DVector::from_vec(vec![0.0, 1.0]),
            |_x: &Point, _v: &DVector<f64>| DVector::zeros(2),
        );
        let p = RicoProblem::new(Euclidean(2), f, vec![g1, g2]).unwrap();
        let w = PrimalDualPair::new(
            Point::new(DVector::zeros(2)),
            DVector::from_vec(vec![1.0, 1.0]),
        );
        let measure = p.second_order_measure(&w, DEFAULT_ACTIVE_TOL).unwrap();
        assert!(measure.is_infinite());
    }

    #[test]
    fn second_order_measure_restricts_to_the_cone() {
        // One active constraint (g = x_1) on Euclidean(3) with a diagonal
        // Hessian: the cone is span(e2, e3) and the measure is the smaller
        // of the two remaining curvatures, regardless of the x_1 curvature.
        let pmat = DMatrix::from_partial_diagonal(3, 3, &[-5.0, -0.7, 0.9]);
        let f = {
            let p1 = pmat.clone();
            let p2 = pmat.clone();
            let p3 = pmat.clone();
            FunctionOracle::new(
                move |x: &Point| 0.5 * (&p1 * &x.coords).dot(&x.coords),
                move |x: &Point| &p2 * &x.coords,
                move |_x: &Point, v: &DVector<f64>| &p3 * v,
            )
        };
        let g1 = FunctionOracle::new(
            |x: &Point| x.coords[0],
            |_x: &Point| DVector::from_vec(vec![1.0, 0.0, 0.0]),
            |_x: &Point, _v: &DVector<f64>| DVector::zeros(3),
        );
        let p = RicoProblem::new(Euclidean(3), f, vec![g1]).unwrap();
        let w = PrimalDualPair::new(Point::new(DVector::zeros(3)), DVector::from_vec(vec![1.0]));
        let measure = p.second_order_measure(&w, DEFAULT_ACTIVE_TOL).unwrap();
        assert!((measure - (-0.7)).abs() <= 1e-8 * 0.7);
    }

    #[test]
    fn strict_feasibility_is_a_sign_test() {
        let p = problem_1d(linear_1d(0.0, 0.0), vec![linear_1d(1.0, 0.0)]);
        assert!(p.strict_feasible(&point1(0.01)));
        assert!(!p.strict_feasible(&point1(0.0)));
        assert!(!p.strict_feasible(&point1(-1e-300)));
    }

    #[test]
    fn problem_types_are_shareable_across_threads() {
        fn check<T: Send + Sync>() {}
        check::<RicoProblem>();
        check::<crate::manifold::Manifold>();
        check::<PrimalDualPair>();
        check::<FunctionOracle>();
    }
}
