//! Implementations behind the `run`, `verify`, `gradcheck`, and `trs-bench`
//! subcommands.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use riptrm::solver::{
    self, InnerConfig, OuterConfig, StoppingConditions, Subsolver, TraceRow,
};
use riptrm::trs::bench::DenseTrs;
use riptrm::{trs, PrimalDualPair, RicoProblem, Tangent};

use crate::feasibility::find_interior_point;
use crate::plot::gnuplot_script;
use crate::problems::{
    build_analytic_1d, build_rosenbrock_grassmann, build_stable_linsys,
    RosenbrockGrassmannSpec, StableLinSysSpec,
};
use crate::trace::{self, AuxRecord, RunRecord};

/// Command failure carrying the process exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Unreadable or unparseable files (exit 2).
    Io(String),
    /// Solver failure or verification violation (exit 1).
    Failure(String),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Usage(_) | CmdError::Io(_) => 2,
            CmdError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Usage(m) => write!(f, "usage error: {m}"),
            CmdError::Io(m) => write!(f, "io error: {m}"),
            CmdError::Failure(m) => write!(f, "{m}"),
        }
    }
}

/// Log level from `RIPTRM_LOG` (`quiet`, `info`, `debug`; default `info`).
pub fn log_level() -> u8 {
    match std::env::var("RIPTRM_LOG").as_deref() {
        Ok("quiet") => 0,
        Ok("debug") => 2,
        _ => 1,
    }
}

pub fn log_info(msg: &str) {
    if log_level() >= 1 {
        eprintln!("[riptrm] {msg}");
    }
}

pub fn log_debug(msg: &str) {
    if log_level() >= 2 {
        eprintln!("[riptrm:debug] {msg}");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderMode {
    /// Enabled exactly when the subsolver is `exact`.
    Auto,
    On,
    Off,
}

impl std::str::FromStr for SecondOrderMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(SecondOrderMode::Auto),
            "on" => Ok(SecondOrderMode::On),
            "off" => Ok(SecondOrderMode::Off),
            other => Err(format!("expected auto|on|off, got '{other}'")),
        }
    }
}

/// Effective run settings: defaults, overridden by a config file, overridden
/// by command-line flags.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub problem: String,
    pub subsolver: Subsolver,
    pub second_order: SecondOrderMode,
    pub budget_s: Option<f64>,
    pub max_outer: Option<usize>,
    pub target_residual: f64,
    pub seed: u64,
    pub mu0: f64,
    pub delta_hat0: Option<f64>,
    pub delta_bar: f64,
    pub delta_max: f64,
    pub eta: f64,
    pub contract_coeff: f64,
    pub clip_c_lo: f64,
    pub clip_c_hi: f64,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
    pub max_inner: usize,
    pub active_tol: f64,
    pub feas_tol: f64,
    pub sigma_grad: f64,
    pub sigma_compl: f64,
    pub sigma_sosp: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        let inner = InnerConfig::default();
        RunSettings {
            problem: "analytic-1d".to_string(),
            subsolver: Subsolver::Tcg,
            second_order: SecondOrderMode::Auto,
            budget_s: None,
            max_outer: Some(60),
            target_residual: 1e-8,
            seed: 0,
            mu0: 0.1,
            delta_hat0: None,
            delta_bar: 1e-15,
            delta_max: inner.delta_max,
            eta: inner.eta,
            contract_coeff: inner.contract_coeff,
            clip_c_lo: inner.clip_c_lo,
            clip_c_hi: inner.clip_c_hi,
            tcg_kappa: inner.tcg_kappa,
            tcg_theta: inner.tcg_theta,
            max_inner: inner.max_inner_iters,
            active_tol: inner.active_tol,
            feas_tol: 1e-3,
            sigma_grad: 1.0,
            sigma_compl: 0.001,
            sigma_sosp: 1.0,
        }
    }
}

impl RunSettings {
    /// Apply `key = value` pairs from a config file.
    pub fn apply_config(&mut self, map: &HashMap<String, String>) -> Result<(), CmdError> {
        let bad = |k: &str, v: &str, e: String| {
            CmdError::Usage(format!("config key '{k}' has bad value '{v}': {e}"))
        };
        for (k, v) in map {
            match k.as_str() {
                "problem" => self.problem = v.clone(),
                "subsolver" => self.subsolver = v.parse().map_err(|e| bad(k, v, e))?,
                "second_order" => self.second_order = v.parse().map_err(|e| bad(k, v, e))?,
                "budget_s" => {
                    self.budget_s = Some(v.parse().map_err(|e: std::num::ParseFloatError| {
                        bad(k, v, e.to_string())
                    })?)
                }
                "max_outer" => {
                    self.max_outer = Some(v.parse().map_err(|e: std::num::ParseIntError| {
                        bad(k, v, e.to_string())
                    })?)
                }
                "target_residual" => self.target_residual = parse_num(k, v)?,
                "seed" => {
                    self.seed = v.parse().map_err(|e: std::num::ParseIntError| {
                        bad(k, v, e.to_string())
                    })?
                }
                "mu0" => self.mu0 = parse_num(k, v)?,
                "delta_hat0" => self.delta_hat0 = Some(parse_num(k, v)?),
                "delta_bar" => self.delta_bar = parse_num(k, v)?,
                "delta_max" => self.delta_max = parse_num(k, v)?,
                "eta" => self.eta = parse_num(k, v)?,
                "contract_coeff" => self.contract_coeff = parse_num(k, v)?,
                "clip_c_lo" => self.clip_c_lo = parse_num(k, v)?,
                "clip_c_hi" => self.clip_c_hi = parse_num(k, v)?,
                "tcg_kappa" => self.tcg_kappa = parse_num(k, v)?,
                "tcg_theta" => self.tcg_theta = parse_num(k, v)?,
                "max_inner" => {
                    self.max_inner = v.parse().map_err(|e: std::num::ParseIntError| {
                        bad(k, v, e.to_string())
                    })?
                }
                "active_tol" => self.active_tol = parse_num(k, v)?,
                "feas_tol" => self.feas_tol = parse_num(k, v)?,
                "sigma_grad" => self.sigma_grad = parse_num(k, v)?,
                "sigma_compl" => self.sigma_compl = parse_num(k, v)?,
                "sigma_sosp" => self.sigma_sosp = parse_num(k, v)?,
                other => {
                    return Err(CmdError::Usage(format!("unknown config key '{other}'")));
                }
            }
        }
        Ok(())
    }

    fn second_order_enabled(&self) -> bool {
        match self.second_order {
            SecondOrderMode::Auto => self.subsolver == Subsolver::Exact,
            SecondOrderMode::On => true,
            SecondOrderMode::Off => false,
        }
    }

    fn outer_config(&self) -> OuterConfig {
        OuterConfig {
            mu0: self.mu0,
            mu_update: Box::new(|mu| 0.5 * mu.powf(1.01)),
            delta_hat0: self.delta_hat0,
            delta_bar: self.delta_bar,
            stopping: StoppingConditions::linear(
                self.sigma_grad,
                self.sigma_compl,
                self.sigma_sosp,
                self.second_order_enabled(),
            ),
            inner: InnerConfig {
                eta: self.eta,
                contract_coeff: self.contract_coeff,
                delta_max: self.delta_max,
                clip_c_lo: self.clip_c_lo,
                clip_c_hi: self.clip_c_hi,
                subsolver: self.subsolver,
                max_inner_iters: self.max_inner,
                tcg_kappa: self.tcg_kappa,
                tcg_theta: self.tcg_theta,
                tcg_max_iter: None,
                exact_tol: trs::DEFAULT_TOL,
                active_tol: self.active_tol,
            },
            max_outer: self.max_outer,
            budget_s: self.budget_s,
            target_residual: Some(self.target_residual),
        }
    }
}

fn parse_num(key: &str, value: &str) -> Result<f64, CmdError> {
    value
        .parse()
        .map_err(|e| CmdError::Usage(format!("config key '{key}' has bad value '{value}': {e}")))
}

/// Build a problem definition by name. The returned pair is the problem's
/// canonical initial iterate when it has one (`stable-linsys` needs a
/// feasibility phase instead).
pub fn build_problem(
    name: &str,
    seed: u64,
) -> Result<(RicoProblem, Option<PrimalDualPair>), CmdError> {
    match name {
        "analytic-1d" => {
            let (p, w0) = build_analytic_1d();
            Ok((p, Some(w0)))
        }
        "rosenbrock-grassmann" => {
            let (p, w0) = build_rosenbrock_grassmann(&RosenbrockGrassmannSpec::default())
                .map_err(|e| CmdError::Failure(e.to_string()))?;
            Ok((p, Some(w0)))
        }
        "stable-linsys" => {
            let spec = StableLinSysSpec {
                seed,
                ..StableLinSysSpec::default()
            };
            let (p, _) = build_stable_linsys(&spec).map_err(|e| CmdError::Failure(e.to_string()))?;
            Ok((p, None))
        }
        other => Err(CmdError::Usage(format!(
            "unknown problem '{other}' (expected one of {})",
            crate::problems::PROBLEM_NAMES.join("|")
        ))),
    }
}

/// Initial iterate for a run: the problem's canonical start, or the
/// feasibility phase with unit multipliers.
pub fn initial_iterate(
    problem: &RicoProblem,
    canonical: Option<PrimalDualPair>,
    seed: u64,
    feas_tol: f64,
) -> Result<PrimalDualPair, CmdError> {
    if let Some(w0) = canonical {
        return Ok(w0);
    }
    log_info("running the feasibility phase for an interior starting point");
    let x0 = find_interior_point(problem, seed, feas_tol, None)
        .map_err(|e| CmdError::Failure(e.to_string()))?;
    let m = problem.num_constraints();
    Ok(PrimalDualPair::new(x0, DVector::from_element(m, 1.0)))
}

fn row_status(r: &riptrm::solver::InnerIterationRecord) -> &'static str {
    if r.cond_met {
        "cond"
    } else if !r.feasible_retraction {
        "shrink"
    } else if r.accepted {
        "accept"
    } else {
        "reject"
    }
}

/// Flatten a solve result into trace rows (one per inner iteration plus an
/// `outer` summary row per barrier stage) and aux records.
pub fn collect_trace(
    rows: &[TraceRow],
    summaries: &[solver::OuterSummary],
    eta: f64,
) -> (Vec<RunRecord>, Vec<AuxRecord>) {
    let mut out = Vec::with_capacity(rows.len() + summaries.len());
    let mut aux = Vec::with_capacity(rows.len());
    for summary in summaries {
        let block: Vec<&TraceRow> = rows.iter().filter(|r| r.outer == summary.k).collect();
        for tr in &block {
            let r = &tr.record;
            out.push(RunRecord {
                outer_iter: tr.outer,
                inner_iter: r.ell,
                elapsed_s: r.elapsed_s,
                mu: r.mu,
                delta: r.delta,
                f: r.f,
                merit: r.merit,
                residual_total: r.residual.total,
                grad_lag_norm: r.residual.grad_lag_norm,
                compl_norm: r.residual.compl,
                min_eig_h: r.min_eig_h,
                second_order_measure: r.second_order,
                accepted: r.accepted,
                status: row_status(r).to_string(),
            });
            let (clip_lo, clip_hi) = match &r.clip_bounds {
                Some((lo, hi)) => (lo.as_slice().to_vec(), hi.as_slice().to_vec()),
                None => (Vec::new(), Vec::new()),
            };
            aux.push(AuxRecord {
                outer_iter: tr.outer,
                inner_iter: r.ell,
                eta,
                ared: r.ared,
                pred: r.pred,
                d_norm: r.d_norm,
                delta_next: r.delta_next,
                feasible_retraction: r.feasible_retraction,
                cond_met: r.cond_met,
                accepted: r.accepted,
                dual_raw: r.dual_raw.as_slice().to_vec(),
                dual_carried: r.dual_carried.as_slice().to_vec(),
                clip_lo,
                clip_hi,
            });
        }
        if let Some(last) = block.last() {
            let r = &last.record;
            out.push(RunRecord {
                outer_iter: summary.k,
                inner_iter: summary.inner_iters,
                elapsed_s: r.elapsed_s,
                mu: summary.mu,
                delta: summary.delta_final,
                f: r.f,
                merit: r.merit,
                residual_total: summary.residual_total,
                grad_lag_norm: r.residual.grad_lag_norm,
                compl_norm: r.residual.compl,
                min_eig_h: r.min_eig_h,
                second_order_measure: r.second_order,
                accepted: false,
                status: "outer".to_string(),
            });
        }
    }
    (out, aux)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CmdError> {
    std::fs::write(path, contents)
        .map_err(|e| CmdError::Io(format!("writing {}: {e}", path.display())))
}

pub struct RunOutput {
    pub result: solver::SolveResult,
    pub records: Vec<RunRecord>,
    pub final_residual: f64,
}

/// Execute a run and write the trace, aux, and state files.
pub fn run_command(
    settings: &RunSettings,
    out: &Path,
    plot_script: Option<&PathBuf>,
) -> Result<RunOutput, CmdError> {
    let (problem, canonical) = build_problem(&settings.problem, settings.seed)?;
    let w0 = initial_iterate(&problem, canonical, settings.seed, settings.feas_tol)?;
    let cfg = settings.outer_config();
    log_info(&format!(
        "solving {} with the {} subsolver (second-order: {})",
        settings.problem,
        settings.subsolver,
        settings.second_order_enabled()
    ));
    let result =
        solver::outer_solve(&problem, &w0, &cfg).map_err(|e| CmdError::Failure(e.to_string()))?;
    let (records, aux) = collect_trace(&result.rows, &result.summaries, settings.eta);

    write_file(out, &trace::emit_csv(&records))?;
    write_file(
        &out.with_extension(ext_plus(out, "aux")),
        &trace::emit_aux(&aux),
    )?;
    write_file(
        &out.with_extension(ext_plus(out, "state")),
        &trace::emit_state(&result.w),
    )?;
    if let Some(script_path) = plot_script {
        write_file(script_path, &gnuplot_script(&out.to_string_lossy(), &records))?;
    }

    let final_residual = problem.kkt_residual(&result.w).total;
    log_info(&format!(
        "finished: {} after {} outer stages, {} trace rows, residual {final_residual:.3e}",
        result.reason,
        result.summaries.len(),
        records.len()
    ));
    Ok(RunOutput {
        result,
        records,
        final_residual,
    })
}

fn ext_plus(path: &Path, suffix: &str) -> String {
    match path.extension() {
        Some(e) => format!("{}.{suffix}", e.to_string_lossy()),
        None => suffix.to_string(),
    }
}

/// Re-derive everything checkable from a finished run and fail on any
/// violation: schema, time ordering, merit monotonicity over accepted rows,
/// acceptance soundness, clip bounds, and the final-state residual.
pub fn verify_command(
    problem_name: &str,
    seed: u64,
    trace_path: &Path,
) -> Result<(), CmdError> {
    let read = |p: PathBuf| -> Result<String, CmdError> {
        std::fs::read_to_string(&p).map_err(|e| CmdError::Io(format!("reading {}: {e}", p.display())))
    };
    let csv_text = read(trace_path.to_path_buf())?;
    let records = trace::parse_csv(&csv_text).map_err(CmdError::Io)?;
    let aux_text = read(trace_path.with_extension(ext_plus(trace_path, "aux")))?;
    let aux = trace::parse_aux(&aux_text).map_err(CmdError::Io)?;
    let state_text = read(trace_path.with_extension(ext_plus(trace_path, "state")))?;
    let w_final = trace::parse_state(&state_text).map_err(CmdError::Io)?;

    // A run that already satisfies its target at the initial point writes a
    // header-only trace; only the state checks apply then.

    // time ordering
    let mut prev_elapsed = f64::NEG_INFINITY;
    let mut prev_outer = 0usize;
    for (i, r) in records.iter().enumerate() {
        if r.elapsed_s < prev_elapsed {
            return Err(CmdError::Failure(format!(
                "row {i}: elapsed_s decreased ({} after {prev_elapsed})",
                r.elapsed_s
            )));
        }
        if r.outer_iter < prev_outer {
            return Err(CmdError::Failure(format!(
                "row {i}: outer index decreased"
            )));
        }
        prev_elapsed = r.elapsed_s;
        prev_outer = r.outer_iter;
    }

    // merit monotone over accepted steps within each outer stage
    let mut last_accept: Option<(usize, usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        if r.status != "accept" {
            continue;
        }
        if let Some((outer, row, merit)) = last_accept {
            if outer == r.outer_iter && r.merit > merit + 1e-12 * (1.0 + merit.abs()) {
                return Err(CmdError::Failure(format!(
                    "row {i}: merit increased over accepted steps \
                     ({} after {merit} in row {row})",
                    r.merit
                )));
            }
        }
        last_accept = Some((r.outer_iter, i, r.merit));
    }

    // the aux sidecar must mirror the non-summary trace rows
    let inner_rows: Vec<&trace::RunRecord> =
        records.iter().filter(|r| r.status != "outer").collect();
    if inner_rows.len() != aux.len() {
        return Err(CmdError::Failure(format!(
            "aux file has {} rows but the trace has {} inner rows",
            aux.len(),
            inner_rows.len()
        )));
    }
    for (i, (r, a)) in inner_rows.iter().zip(&aux).enumerate() {
        if r.outer_iter != a.outer_iter || r.inner_iter != a.inner_iter || r.accepted != a.accepted
        {
            return Err(CmdError::Failure(format!(
                "aux row {i} does not match trace row (outer {}, inner {})",
                r.outer_iter, r.inner_iter
            )));
        }
    }

    // acceptance soundness and clip bounds from the aux records
    for (i, a) in aux.iter().enumerate() {
        if a.cond_met {
            continue;
        }
        let sound = a.feasible_retraction && a.pred > 0.0 && a.ared > a.eta * a.pred;
        if a.accepted && !sound {
            return Err(CmdError::Failure(format!(
                "aux row {i} (outer {}, inner {}): accepted without ared > eta * pred",
                a.outer_iter, a.inner_iter
            )));
        }
        if a.accepted {
            for c in 0..a.dual_carried.len() {
                let lo = a.clip_lo.get(c).copied().unwrap_or(f64::NEG_INFINITY);
                let hi = a.clip_hi.get(c).copied().unwrap_or(f64::INFINITY);
                let v = a.dual_carried[c];
                if !(v >= lo && v <= hi && v > 0.0) {
                    return Err(CmdError::Failure(format!(
                        "aux row {i}: carried dual {c} = {v} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
    }

    // final state: rebuild the problem and recompute
    let (problem, _) = build_problem(problem_name, seed)?;
    problem
        .manifold
        .check_point(&w_final.x)
        .map_err(|e| CmdError::Failure(format!("final point off the manifold: {e}")))?;
    if !problem.strict_feasible(&w_final.x) {
        return Err(CmdError::Failure("final point is not strictly feasible".into()));
    }
    let recomputed = problem.kkt_residual(&w_final);
    if let Some(last) = records.last() {
        if (recomputed.total - last.residual_total).abs()
            > 1e-10 * (1.0 + recomputed.total.abs())
        {
            return Err(CmdError::Failure(format!(
                "final residual mismatch: trace {} vs recomputed {}",
                last.residual_total, recomputed.total
            )));
        }
        let so = problem
            .second_order_measure(&w_final, riptrm::problem::DEFAULT_ACTIVE_TOL)
            .map_err(|e| CmdError::Failure(e.to_string()))?;
        let trace_so = last.second_order_measure;
        let agree = if so.is_infinite() || trace_so.is_infinite() {
            so == trace_so
        } else {
            (so - trace_so).abs() <= 1e-10 * (1.0 + so.abs())
        };
        if !agree {
            return Err(CmdError::Failure(format!(
                "final second-order measure mismatch: trace {trace_so} vs recomputed {so}"
            )));
        }
    }
    log_info(&format!(
        "verify: {} rows clean; final residual {:.3e}",
        records.len(),
        recomputed.total
    ));
    Ok(())
}

/// Finite-difference validation of a built-in problem's oracles.
pub fn gradcheck_command(problem_name: &str, seed: u64) -> Result<(), CmdError> {
    let (problem, canonical) = build_problem(problem_name, seed)?;
    // Check at the canonical start where one exists, otherwise at a generic
    // manifold point (special points of data-fit objectives can sit near
    // nonsmooth configurations).
    let x = match canonical {
        Some(w0) => w0.x,
        None => problem.manifold.sample_point(seed),
    };
    let opts = riptrm::fdcheck::CheckOptions::default();
    let reports =
        riptrm::fdcheck::check_problem(&problem, &x, seed, &opts).map_err(|e| {
            CmdError::Failure(format!("derivative check could not run: {e}"))
        })?;
    let mut ok = true;
    println!("oracle      grad-rel-err  ehess-rel-err  grad-slope  hess-slope  pass");
    for (name, rep) in &reports {
        ok &= rep.pass;
        println!(
            "{name:<11} {:<13.3e} {:<14.3e} {:<11.3} {:<11.3} {}",
            rep.max_grad_rel_err,
            rep.max_ehess_rel_err,
            rep.min_grad_slope,
            rep.min_hess_slope,
            if rep.pass { "yes" } else { "NO" }
        );
    }
    if ok {
        Ok(())
    } else {
        Err(CmdError::Failure("derivative checks failed".into()))
    }
}

/// Random subproblems through all three subsolvers plus the optimality
/// verifier on the exact step.
pub fn trs_bench_command(count: usize, seed: u64) -> Result<(), CmdError> {
    let mut worst_gap_tcg = 0.0f64;
    let mut worst_gap_cauchy = 0.0f64;
    let mut hard_cases = 0usize;
    for i in 0..count {
        let dim = 1 + (i % 10);
        let hard = i % 10 == 0;
        hard_cases += hard as usize;
        let d = DenseTrs::random(seed.wrapping_add(i as u64), dim, hard);
        let apply = |v: &Tangent| d.apply(v);
        let inst = trs::TrsInstance::new(&d.manifold, &d.point, &apply, d.grad_tangent(), d.radius)
            .map_err(|e| CmdError::Failure(e.to_string()))?;
        let c = trs::cauchy_step(&inst).map_err(|e| CmdError::Failure(e.to_string()))?;
        let t = trs::truncated_cg(&inst, 0.1, 1.0, dim)
            .map_err(|e| CmdError::Failure(e.to_string()))?;
        let e = match trs::exact_step(&inst, 1e-8) {
            Ok(sol) => sol,
            Err(err) => {
                return Err(CmdError::Failure(format!(
                    "instance {i} (dim {dim}, hard {hard}): {err}"
                )))
            }
        };
        let rep = trs::verify_global_optimality(&inst, &e.direction, e.nu.unwrap_or(0.0), 1e-8)
            .map_err(|err| CmdError::Failure(err.to_string()))?;
        if !rep.pass {
            return Err(CmdError::Failure(format!(
                "instance {i}: exact step failed the optimality verifier: {rep:?}"
            )));
        }
        worst_gap_cauchy = worst_gap_cauchy.max(c.model_decrease - e.model_decrease);
        worst_gap_tcg = worst_gap_tcg.max(t.model_decrease - e.model_decrease);
    }
    println!(
        "trs-bench: {count} instances ({hard_cases} hard-case) verified at 1e-8; \
         max decrease surplus over exact: cauchy {worst_gap_cauchy:.3e}, tcg {worst_gap_tcg:.3e}"
    );
    Ok(())
}
