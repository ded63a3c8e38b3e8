//! The interior-point trust-region iteration.
//!
//! [`outer_solve`] drives the barrier parameter to zero, calling
//! [`inner_solve`] once per barrier value with stopping tolerances tied to
//! the current barrier parameter through forcing functions. The inner
//! iteration solves a trust-region subproblem on the condensed operator,
//! takes the corresponding dual Newton step, tests the retracted candidate
//! against the stopping conditions, and otherwise accepts or rejects the
//! step by comparing actual and predicted merit reduction. Accepted dual
//! updates are clipped into a positivity-preserving interval.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg;
use crate::problem::{
    LagrangianOperator, PrimalDualPair, ResidualBreakdown, RicoProblem, DEFAULT_ACTIVE_TOL,
    DIVISION_GUARD,
};
use crate::trs::{self, TrsInstance, TrsStatus};

/// Barrier values below this stop the outer iteration.
pub const MU_UNDERFLOW: f64 = 1e-30;

/// Floor applied to the complementarity tolerance.
pub const SIGMA_FLOOR: f64 = 1e-30;

/// Trust-region radii below this are treated as a stall. The bound sits
/// far above the scale where squared radii denormalize and boundary-step
/// computations lose all precision.
pub const RADIUS_UNDERFLOW: f64 = 1e-120;

/// Which subproblem solver the inner iteration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsolver {
    Cauchy,
    Tcg,
    Exact,
}

impl std::fmt::Display for Subsolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Subsolver::Cauchy => "cauchy",
            Subsolver::Tcg => "tcg",
            Subsolver::Exact => "exact",
        })
    }
}

impl std::str::FromStr for Subsolver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cauchy" => Ok(Subsolver::Cauchy),
            "tcg" => Ok(Subsolver::Tcg),
            "exact" => Ok(Subsolver::Exact),
            other => Err(format!("unknown subsolver '{other}'")),
        }
    }
}

type Forcing = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Barrier-dependent stopping tolerances. Each forcing function vanishes
/// exactly at zero and is positive elsewhere.
pub struct StoppingConditions {
    pub sigma_grad: Forcing,
    pub sigma_compl: Forcing,
    pub sigma_sosp: Forcing,
    /// Whether the minimum-eigenvalue clause participates.
    pub second_order: bool,
}

impl StoppingConditions {
    /// Linear forcing functions `c * mu` with the complementarity tolerance
    /// floored at [`SIGMA_FLOOR`].
    pub fn linear(c_grad: f64, c_compl: f64, c_sosp: f64, second_order: bool) -> Self {
        StoppingConditions {
            sigma_grad: Box::new(move |mu| c_grad * mu),
            sigma_compl: Box::new(move |mu| (c_compl * mu).max(SIGMA_FLOOR)),
            sigma_sosp: Box::new(move |mu| c_sosp * mu),
            second_order,
        }
    }

    /// The defaults: `sigma_grad = mu`, `sigma_compl = 0.001 mu`,
    /// `sigma_sosp = mu`.
    pub fn standard(second_order: bool) -> Self {
        StoppingConditions::linear(1.0, 0.001, 1.0, second_order)
    }
}

impl std::fmt::Debug for StoppingConditions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StoppingConditions")
            .field("second_order", &self.second_order)
            .finish()
    }
}

/// Inner-iteration parameters.
#[derive(Debug, Clone)]
pub struct InnerConfig {
    /// Acceptance threshold on ared/pred, in (0, 1/4).
    pub eta: f64,
    /// Radius shrink factor after an infeasible retraction, in (0, 1).
    pub contract_coeff: f64,
    /// Maximal trust-region radius.
    pub delta_max: f64,
    /// Lower clipping constant, in (0, 1).
    pub clip_c_lo: f64,
    /// Upper clipping constant, > 1.
    pub clip_c_hi: f64,
    pub subsolver: Subsolver,
    pub max_inner_iters: usize,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
    /// Truncated-CG iteration cap; `None` means the tangent dimension.
    pub tcg_max_iter: Option<usize>,
    /// Verification tolerance for the exact subsolver.
    pub exact_tol: f64,
    /// Activity threshold for the second-order telemetry column.
    pub active_tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            eta: 0.1,
            contract_coeff: 0.25,
            delta_max: 10.0,
            clip_c_lo: 0.5,
            clip_c_hi: 1e20,
            subsolver: Subsolver::Tcg,
            max_inner_iters: 10_000,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
            tcg_max_iter: None,
            exact_tol: trs::DEFAULT_TOL,
            active_tol: DEFAULT_ACTIVE_TOL,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.eta > 0.0 && self.eta < 0.25) {
            return bad(format!("eta must lie in (0, 1/4), got {}", self.eta));
        }
        if !(self.contract_coeff > 0.0 && self.contract_coeff < 1.0) {
            return bad(format!(
                "contract_coeff must lie in (0, 1), got {}",
                self.contract_coeff
            ));
        }
        if !(self.clip_c_lo > 0.0 && self.clip_c_lo < 1.0 && self.clip_c_hi > 1.0) {
            return bad(format!(
                "clipping constants need 0 < c_lo < 1 < c_hi, got ({}, {})",
                self.clip_c_lo, self.clip_c_hi
            ));
        }
        if self.delta_max <= 0.0 || self.delta_max.is_nan() {
            return bad(format!("delta_max must be positive, got {}", self.delta_max));
        }
        Ok(())
    }
}

/// Outer-iteration parameters.
pub struct OuterConfig {
    /// Initial barrier parameter.
    pub mu0: f64,
    /// Barrier schedule, applied after each inner solve.
    pub mu_update: Forcing,
    /// Initial trust-region radius; `None` means `manifold scale / 8`.
    pub delta_hat0: Option<f64>,
    /// Minimum restart radius for subsequent outer iterations.
    pub delta_bar: f64,
    pub stopping: StoppingConditions,
    pub inner: InnerConfig,
    pub max_outer: Option<usize>,
    /// Wall-clock budget in seconds.
    pub budget_s: Option<f64>,
    /// Stop once the KKT residual total falls below this.
    pub target_residual: Option<f64>,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            mu0: 0.1,
            mu_update: Box::new(|mu| 0.5 * mu.powf(1.01)),
            delta_hat0: None,
            delta_bar: 1e-15,
            stopping: StoppingConditions::standard(false),
            inner: InnerConfig::default(),
            max_outer: Some(60),
            budget_s: None,
            target_residual: Some(1e-8),
        }
    }
}

impl std::fmt::Debug for OuterConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuterConfig")
            .field("mu0", &self.mu0)
            .field("delta_hat0", &self.delta_hat0)
            .field("delta_bar", &self.delta_bar)
            .field("stopping", &self.stopping)
            .field("inner", &self.inner)
            .field("max_outer", &self.max_outer)
            .field("budget_s", &self.budget_s)
            .field("target_residual", &self.target_residual)
            .finish()
    }
}

/// One inner iteration, as recorded for the trace.
#[derive(Debug, Clone)]
pub struct InnerIterationRecord {
    pub ell: usize,
    /// Radius used by this iteration.
    pub delta: f64,
    pub d_norm: f64,
    /// Merit decrease; NaN when the iteration never evaluated it.
    pub ared: f64,
    /// Model decrease; NaN when the iteration never evaluated it.
    pub pred: f64,
    /// ared / pred; NaN when undefined.
    pub rho: f64,
    pub accepted: bool,
    pub feasible_retraction: bool,
    /// The candidate satisfied the stopping conditions and was returned.
    pub cond_met: bool,
    pub trs_status: TrsStatus,
    /// Raw dual Newton update `lambda + dlambda`.
    pub dual_raw: DVector<f64>,
    /// Multipliers carried forward.
    pub dual_carried: DVector<f64>,
    /// Clipping interval, when clipping was applied.
    pub clip_bounds: Option<(DVector<f64>, DVector<f64>)>,
    /// Radius for the next iteration.
    pub delta_next: f64,
    /// Seconds since the solve started when a wall clock is attached;
    /// exactly zero otherwise, keeping unbudgeted runs reproducible.
    pub elapsed_s: f64,
    // telemetry at the post-iteration iterate
    pub mu: f64,
    pub f: f64,
    pub merit: f64,
    pub residual: ResidualBreakdown,
    pub min_eig_h: f64,
    pub second_order: f64,
}

/// Why an inner solve returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerOutcome {
    CondSatisfied,
    MaxItersExhausted,
    DeadlineExhausted,
    RadiusUnderflow,
    /// The model decrease fell below the merit function's floating-point
    /// resolution while the stopping conditions were still unmet; further
    /// radius shrinking only produces quantization noise.
    NumericalLimit,
}

#[derive(Debug)]
pub struct InnerResult {
    pub w: PrimalDualPair,
    pub delta_final: f64,
    pub records: Vec<InnerIterationRecord>,
    pub outcome: InnerOutcome,
}

/// Why the outer iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    TargetResidual,
    MaxOuter,
    WallClock,
    MuUnderflow,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminationReason::TargetResidual => "target-residual",
            TerminationReason::MaxOuter => "max-outer",
            TerminationReason::WallClock => "wall-clock",
            TerminationReason::MuUnderflow => "mu-underflow",
        })
    }
}

/// One row of the solver trace: an inner record tagged with its outer index.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub outer: usize,
    pub record: InnerIterationRecord,
}

/// Per-outer-iteration summary.
#[derive(Debug, Clone, Copy)]
pub struct OuterSummary {
    pub k: usize,
    pub mu: f64,
    pub delta_hat: f64,
    pub delta_final: f64,
    pub inner_iters: usize,
    pub residual_total: f64,
    pub cond_satisfied: bool,
}

#[derive(Debug)]
pub struct SolveResult {
    pub w: PrimalDualPair,
    pub rows: Vec<TraceRow>,
    pub summaries: Vec<OuterSummary>,
    pub reason: TerminationReason,
}

/// Actual and predicted merit reductions for a step `d` at `w`.
///
/// `ared` compares merit values through the retraction; `pred` is the model
/// decrease of the subproblem built from the condensed operator and the
/// barrier gradient.
pub fn reductions(
    problem: &RicoProblem,
    w: &PrimalDualPair,
    mu: f64,
    d: &crate::manifold::Tangent,
) -> Result<(f64, f64), Error> {
    let op = LagrangianOperator::new(problem, w)?;
    let phi = problem.barrier_gradient(&w.x, mu)?;
    let apply = |v: &crate::manifold::Tangent| {
        op.condensed(v)
            .expect("reductions requires a strictly feasible iterate")
    };
    // any positive radius works; the model does not depend on it
    let inst = TrsInstance::new(&problem.manifold, &w.x, &apply, phi, 1.0)?;
    let pred = -inst.model_value(d)?;
    let merit_old = problem.merit(&w.x, mu)?;
    let retracted = problem.manifold.retract(&w.x, d)?;
    let merit_new = problem.merit(&retracted, mu)?;
    Ok((merit_old - merit_new, pred))
}

/// Trust-region radius update from the reduction ratio. Boundary equality
/// `||d|| = delta` is tested at relative tolerance 1e-12.
pub fn tr_radius_update(delta: f64, ared: f64, pred: f64, d_norm: f64, delta_max: f64) -> f64 {
    debug_assert!(pred >= 0.0, "callers handle nonpositive pred");
    if ared < 0.25 * pred {
        0.25 * delta
    } else if ared >= 0.75 * pred && (d_norm - delta).abs() <= 1e-12 * delta {
        (2.0 * delta).min(delta_max)
    } else {
        delta
    }
}

/// Dual Newton step `dlambda_i = -lambda_i + mu/g_i - (lambda_i/g_i) <grad g_i, d>`.
pub fn dual_newton_step(
    problem: &RicoProblem,
    w: &PrimalDualPair,
    mu: f64,
    d: &crate::manifold::Tangent,
) -> Result<DVector<f64>, Error> {
    let op = LagrangianOperator::new(problem, w)?;
    dual_newton_from_op(problem, &op, mu, d)
}

fn dual_newton_from_op(
    problem: &RicoProblem,
    op: &LagrangianOperator,
    mu: f64,
    d: &crate::manifold::Tangent,
) -> Result<DVector<f64>, Error> {
    let m = op.g.len();
    let mut out = DVector::zeros(m);
    for i in 0..m {
        let gi = op.g[i];
        if gi < DIVISION_GUARD {
            return Err(Error::NotStrictlyFeasible {
                index: i,
                value: gi,
            });
        }
        let slope = problem.manifold.inner(&op.x, &op.cons_rgrads[i], d)?;
        out[i] = -op.lambda[i] + mu / gi - op.lambda[i] / gi * slope;
    }
    Ok(out)
}

/// Componentwise clipping interval for the dual update:
/// `zeta_lo_i = c_lo * min(1, lambda_i, mu/g_i)` and
/// `zeta_hi_i = max(c_hi, lambda_i, c_hi/mu, c_hi/g_i)`, with `g` evaluated
/// at the retracted point.
pub fn clip_interval(
    lambda_prev: &DVector<f64>,
    mu: f64,
    g_new: &DVector<f64>,
    c_lo: f64,
    c_hi: f64,
) -> Result<(DVector<f64>, DVector<f64>), Error> {
    if mu <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "clipping needs a positive barrier parameter, got {mu}"
        )));
    }
    let m = lambda_prev.len();
    if g_new.len() != m {
        return Err(Error::InvalidInput(
            "clipping: multiplier/constraint length mismatch".into(),
        ));
    }
    let mut lo = DVector::zeros(m);
    let mut hi = DVector::zeros(m);
    for i in 0..m {
        if g_new[i] <= 0.0 {
            return Err(Error::NotStrictlyFeasible {
                index: i,
                value: g_new[i],
            });
        }
        if lambda_prev[i] <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "clipping needs positive previous multipliers, lambda[{i}] = {}",
                lambda_prev[i]
            )));
        }
        lo[i] = c_lo * 1.0f64.min(lambda_prev[i]).min(mu / g_new[i]);
        hi[i] = c_hi.max(lambda_prev[i]).max(c_hi / mu).max(c_hi / g_new[i]);
    }
    Ok((lo, hi))
}

/// Clamp the raw dual update into the clipping interval.
pub fn clip_duals(
    raw: &DVector<f64>,
    lambda_prev: &DVector<f64>,
    mu: f64,
    g_new: &DVector<f64>,
    c_lo: f64,
    c_hi: f64,
) -> Result<DVector<f64>, Error> {
    let (lo, hi) = clip_interval(lambda_prev, mu, g_new, c_lo, c_hi)?;
    Ok(DVector::from_fn(raw.len(), |i, _| raw[i].clamp(lo[i], hi[i])))
}

/// Evaluation of the stopping conditions at one point.
#[derive(Debug, Clone)]
pub struct StopBreakdown {
    pub grad_norm: f64,
    pub grad_tol: f64,
    pub compl_norm: f64,
    pub compl_tol: f64,
    pub primal_strict: bool,
    pub dual_strict: bool,
    /// Present only when the second-order clause was evaluated.
    pub min_eig_h: Option<f64>,
    pub sosp_tol: f64,
    pub satisfied: bool,
}

/// Smallest eigenvalue of the condensed operator in an orthonormal tangent
/// basis. Requires a strictly feasible point and positive multipliers.
pub fn condensed_min_eig(problem: &RicoProblem, w: &PrimalDualPair) -> Result<f64, Error> {
    let op = LagrangianOperator::new(problem, w)?;
    let basis = problem.manifold.tangent_basis(&w.x)?;
    let d = basis.len();
    if d == 0 {
        return Ok(f64::INFINITY);
    }
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let hb = op.condensed(&basis[j])?;
        for i in 0..d {
            m[(i, j)] = problem.manifold.inner(&w.x, &hb, &basis[i])?;
        }
    }
    let m = (&m + m.transpose()) * 0.5;
    Ok(linalg::sym_eig(&m)?.values[0])
}

/// Test the stopping conditions at `w` for barrier value `mu`.
///
/// Strict positivity of `g` and `lambda` is evaluated first; the eigenvalue
/// clause only runs when it must (second-order mode, positivity holds).
pub fn stopping_satisfied(
    problem: &RicoProblem,
    w: &PrimalDualPair,
    mu: f64,
    conds: &StoppingConditions,
) -> Result<StopBreakdown, Error> {
    let g = problem.constraint_values(&w.x);
    let primal_strict = g.iter().all(|&gi| gi > 0.0);
    let dual_strict = w.lambda.iter().all(|&li| li > 0.0);
    let grad = problem.grad_lagrangian(w)?;
    let grad_norm = problem.manifold.norm(&w.x, &grad)?;
    let compl_norm = DVector::from_fn(g.len(), |i, _| w.lambda[i] * g[i] - mu).norm();
    let grad_tol = (conds.sigma_grad)(mu);
    let compl_tol = (conds.sigma_compl)(mu);
    let sosp_tol = (conds.sigma_sosp)(mu);

    let mut satisfied =
        primal_strict && dual_strict && grad_norm <= grad_tol && compl_norm <= compl_tol;
    let mut min_eig_h = None;
    if satisfied && conds.second_order {
        let eig = condensed_min_eig(problem, w)?;
        min_eig_h = Some(eig);
        satisfied = eig >= -sosp_tol;
    }
    Ok(StopBreakdown {
        grad_norm,
        grad_tol,
        compl_norm,
        compl_tol,
        primal_strict,
        dual_strict,
        min_eig_h,
        sosp_tol,
        satisfied,
    })
}

fn deadline_passed(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Telemetry fields evaluated at an iterate.
fn telemetry(
    problem: &RicoProblem,
    w: &PrimalDualPair,
    mu: f64,
    active_tol: f64,
) -> Result<(f64, f64, ResidualBreakdown, f64, f64), Error> {
    let f = problem.objective_value(&w.x);
    let merit = problem.merit(&w.x, mu)?;
    let report = problem.stationarity_report(w, active_tol)?;
    let min_eig_h = report.min_eig_condensed.unwrap_or(f64::NAN);
    Ok((f, merit, report.residual, min_eig_h, report.second_order))
}

/// Inner iteration: repeatedly solve the subproblem at fixed `mu` until the
/// candidate satisfies the stopping conditions or a budget runs out.
#[allow(clippy::too_many_arguments)]
pub fn inner_solve(
    problem: &RicoProblem,
    w0: &PrimalDualPair,
    mu: f64,
    delta0: f64,
    conds: &StoppingConditions,
    cfg: &InnerConfig,
    deadline: Option<Instant>,
    clock: Option<Instant>,
) -> Result<InnerResult, Error> {
    cfg.validate()?;
    if !(delta0 > 0.0 && delta0 <= cfg.delta_max) {
        return Err(Error::InvalidInput(format!(
            "initial radius {delta0} outside (0, {}]",
            cfg.delta_max
        )));
    }
    if mu <= 0.0 || mu.is_nan() {
        return Err(Error::InvalidInput(format!(
            "inner iteration needs a positive barrier parameter, got {mu}"
        )));
    }
    if !problem.strict_feasible(&w0.x) {
        return Err(Error::InvalidInput(
            "inner iteration started at a point that is not strictly feasible".into(),
        ));
    }
    if w0.lambda.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidInput(
            "inner iteration needs strictly positive initial multipliers".into(),
        ));
    }

    let mut w = w0.clone();
    let mut delta = delta0;
    let mut records: Vec<InnerIterationRecord> = Vec::new();
    let manifold = &problem.manifold;
    let elapsed = || clock.map(|c| c.elapsed().as_secs_f64()).unwrap_or(0.0);

    for ell in 0..cfg.max_inner_iters {
        if deadline_passed(deadline) {
            return Ok(InnerResult {
                w,
                delta_final: delta,
                records,
                outcome: InnerOutcome::DeadlineExhausted,
            });
        }
        if delta < RADIUS_UNDERFLOW {
            return Ok(InnerResult {
                w,
                delta_final: delta,
                records,
                outcome: InnerOutcome::RadiusUnderflow,
            });
        }

        let op = LagrangianOperator::new(problem, &w)?;
        let phi = problem.barrier_gradient(&w.x, mu)?;
        let phi_norm = manifold.norm(&w.x, &phi)?;
        let apply = |v: &crate::manifold::Tangent| {
            op.condensed(v)
                .expect("inner iterates stay strictly feasible with positive multipliers")
        };
        let inst = TrsInstance::new(manifold, &w.x, &apply, phi, delta)?;
        let sol = match cfg.subsolver {
            Subsolver::Cauchy => trs::cauchy_step(&inst)?,
            Subsolver::Tcg => trs::truncated_cg(
                &inst,
                cfg.tcg_kappa,
                cfg.tcg_theta,
                cfg.tcg_max_iter.unwrap_or_else(|| inst.dim()),
            )?,
            Subsolver::Exact => trs::exact_step(&inst, cfg.exact_tol)?,
        };
        let d = sol.direction.clone();
        let d_norm = inst.norm(&d)?;
        if d.ambient.iter().all(|&c| c == 0.0) && phi_norm > 0.0 {
            return Err(Error::SolverFailure(format!(
                "subsolver returned a zero direction with nonzero barrier gradient \
                 (||phi|| = {phi_norm:.3e})"
            )));
        }

        let dlam = dual_newton_from_op(problem, &op, mu, &d)?;
        let raw = &w.lambda + &dlam;
        let candidate = PrimalDualPair::new(manifold.retract(&w.x, &d)?, raw.clone());

        // Stopping test on the unclipped candidate.
        let stop = stopping_satisfied(problem, &candidate, mu, conds)?;
        if stop.satisfied {
            let (f, merit, residual, min_eig_h, second_order) =
                telemetry(problem, &candidate, mu, cfg.active_tol)?;
            records.push(InnerIterationRecord {
                ell,
                delta,
                d_norm,
                ared: f64::NAN,
                pred: f64::NAN,
                rho: f64::NAN,
                accepted: false,
                feasible_retraction: true,
                cond_met: true,
                trs_status: sol.status,
                dual_raw: raw.clone(),
                dual_carried: raw,
                clip_bounds: None,
                delta_next: delta,
                elapsed_s: elapsed(),
                mu,
                f,
                merit,
                residual,
                min_eig_h,
                second_order,
            });
            return Ok(InnerResult {
                w: candidate,
                delta_final: delta,
                records,
                outcome: InnerOutcome::CondSatisfied,
            });
        }

        // Strict feasibility of the retracted point.
        let g_new = problem.constraint_values(&candidate.x);
        if g_new.iter().any(|&gi| gi <= 0.0) {
            let delta_next = cfg.contract_coeff * d_norm;
            let (f, merit, residual, min_eig_h, second_order) =
                telemetry(problem, &w, mu, cfg.active_tol)?;
            records.push(InnerIterationRecord {
                ell,
                delta,
                d_norm,
                ared: f64::NAN,
                pred: f64::NAN,
                rho: f64::NAN,
                accepted: false,
                feasible_retraction: false,
                cond_met: false,
                trs_status: sol.status,
                dual_raw: raw,
                dual_carried: w.lambda.clone(),
                clip_bounds: None,
                delta_next,
                elapsed_s: elapsed(),
                mu,
                f,
                merit,
                residual,
                min_eig_h,
                second_order,
            });
            delta = delta_next;
            continue;
        }

        // Reductions and the radius/acceptance rules.
        let merit_old = problem.merit(&w.x, mu)?;
        let merit_new = problem.merit(&candidate.x, mu)?;
        let ared = merit_old - merit_new;
        let pred = sol.model_decrease;
        // An interior step whose predicted decrease is below the merit's
        // representable resolution ends the stage: the model optimum is
        // already inside the region, so no radius predicts more, and the
        // acceptance ratio is pure rounding noise. Boundary-capped steps
        // are exempt; their small predictions only reflect a small radius,
        // which the expansion rule can still recover.
        if sol.status == TrsStatus::Interior
            && pred > 0.0
            && pred <= 4.0 * f64::EPSILON * (1.0 + merit_old.abs())
        {
            return Ok(InnerResult {
                w,
                delta_final: delta,
                records,
                outcome: InnerOutcome::NumericalLimit,
            });
        }
        let (accepted, delta_next) = if pred <= 0.0 {
            // Possible only through roundoff; treated as unsuccessful.
            (false, 0.25 * delta)
        } else {
            (
                ared > cfg.eta * pred,
                tr_radius_update(delta, ared, pred, d_norm, cfg.delta_max),
            )
        };

        let mut clip_bounds = None;
        if accepted {
            let (lo, hi) = clip_interval(&w.lambda, mu, &g_new, cfg.clip_c_lo, cfg.clip_c_hi)?;
            let clipped = DVector::from_fn(raw.len(), |i, _| raw[i].clamp(lo[i], hi[i]));
            clip_bounds = Some((lo, hi));
            w = PrimalDualPair::new(candidate.x, clipped);
        }

        let (f, merit, residual, min_eig_h, second_order) =
            telemetry(problem, &w, mu, cfg.active_tol)?;
        records.push(InnerIterationRecord {
            ell,
            delta,
            d_norm,
            ared,
            pred,
            rho: if pred != 0.0 { ared / pred } else { f64::NAN },
            accepted,
            feasible_retraction: true,
            cond_met: false,
            trs_status: sol.status,
            dual_raw: raw,
            dual_carried: w.lambda.clone(),
            clip_bounds,
            delta_next,
            elapsed_s: elapsed(),
            mu,
            f,
            merit,
            residual,
            min_eig_h,
            second_order,
        });
        delta = delta_next;
    }

    Ok(InnerResult {
        w,
        delta_final: delta,
        records,
        outcome: InnerOutcome::MaxItersExhausted,
    })
}

/// Outer iteration: drive the barrier parameter to zero, restarting the
/// inner iteration with `delta_hat_{k+1} = max(delta_final_k, delta_bar)`.
pub fn outer_solve(
    problem: &RicoProblem,
    w0: &PrimalDualPair,
    cfg: &OuterConfig,
) -> Result<SolveResult, Error> {
    cfg.inner.validate()?;
    if cfg.mu0 <= 0.0 || cfg.mu0.is_nan() {
        return Err(Error::InvalidInput(format!(
            "initial barrier parameter must be positive, got {}",
            cfg.mu0
        )));
    }
    if !(cfg.delta_bar > 0.0 && cfg.delta_bar <= cfg.inner.delta_max) {
        return Err(Error::InvalidInput(format!(
            "delta_bar must lie in (0, delta_max], got {}",
            cfg.delta_bar
        )));
    }
    problem.manifold.check_point(&w0.x)?;
    if !problem.strict_feasible(&w0.x) {
        return Err(Error::InvalidInput(
            "initial point is not strictly feasible".into(),
        ));
    }
    if w0.lambda.len() != problem.num_constraints() {
        return Err(Error::InvalidInput(
            "initial multiplier length does not match the constraint count".into(),
        ));
    }
    if w0.lambda.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidInput(
            "initial multipliers must be strictly positive".into(),
        ));
    }

    let start = Instant::now();
    let deadline = cfg
        .budget_s
        .map(|s| start + std::time::Duration::from_secs_f64(s));
    let mut delta_hat = cfg
        .delta_hat0
        .unwrap_or(problem.manifold.scale() / 8.0)
        .min(cfg.inner.delta_max);
    let mut mu = cfg.mu0;
    let mut w = w0.clone();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut summaries: Vec<OuterSummary> = Vec::new();

    let finish = |w: PrimalDualPair,
                  rows: Vec<TraceRow>,
                  summaries: Vec<OuterSummary>,
                  reason: TerminationReason| {
        Ok(SolveResult {
            w,
            rows,
            summaries,
            reason,
        })
    };

    if let Some(target) = cfg.target_residual {
        if problem.kkt_residual(&w).total <= target {
            return finish(w, rows, summaries, TerminationReason::TargetResidual);
        }
    }

    for k in 0.. {
        if let Some(max) = cfg.max_outer {
            if k >= max {
                return finish(w, rows, summaries, TerminationReason::MaxOuter);
            }
        }
        if mu < MU_UNDERFLOW {
            return finish(w, rows, summaries, TerminationReason::MuUnderflow);
        }
        if deadline_passed(deadline) {
            return finish(w, rows, summaries, TerminationReason::WallClock);
        }

        let clock = deadline.map(|_| start);
        let inner = inner_solve(problem, &w, mu, delta_hat, &cfg.stopping, &cfg.inner, deadline, clock)?;
        let inner_iters = inner.records.len();
        rows.extend(inner.records.into_iter().map(|record| TraceRow {
            outer: k,
            record,
        }));
        w = inner.w;
        let residual_total = problem.kkt_residual(&w).total;
        summaries.push(OuterSummary {
            k,
            mu,
            delta_hat,
            delta_final: inner.delta_final,
            inner_iters,
            residual_total,
            cond_satisfied: inner.outcome == InnerOutcome::CondSatisfied,
        });
        // delta_final never exceeds delta_max, so the restart rule is exact.
        delta_hat = inner.delta_final.max(cfg.delta_bar);

        if let Some(target) = cfg.target_residual {
            if residual_total <= target {
                return finish(w, rows, summaries, TerminationReason::TargetResidual);
            }
        }
        match inner.outcome {
            InnerOutcome::DeadlineExhausted => {
                return finish(w, rows, summaries, TerminationReason::WallClock)
            }
            // Stalled stages (iteration budget, radius underflow, or the
            // merit resolution limit) carry the best iterate into the next
            // barrier stage; the dual recentering there keeps reducing the
            // residual even when the stopping conditions are out of reach
            // in finite precision.
            InnerOutcome::CondSatisfied
            | InnerOutcome::MaxItersExhausted
            | InnerOutcome::RadiusUnderflow
            | InnerOutcome::NumericalLimit => {}
        }
        mu = (cfg.mu_update)(mu);
    }
    unreachable!("the outer loop always returns through a stopping rule");
}
