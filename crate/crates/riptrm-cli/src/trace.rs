//! Trace records and their CSV serialization.
//!
//! The main trace is one CSV row per inner iteration plus one summary row
//! per outer iteration (status `outer`). Floats are printed in shortest
//! round-trip scientific form, so `parse(emit(rows)) == rows` exactly.
//!
//! Two sidecar files accompany a run:
//! - `<out>.aux` carries solver internals per inner iteration (reductions,
//!   acceptance threshold, raw/clipped duals, clip bounds) for the `verify`
//!   command;
//! - `<out>.state` carries the final iterate so the residual can be
//!   recomputed independently.

use std::fmt::Write as _;

use nalgebra::DVector;
use riptrm::PrimalDualPair;

pub const CSV_HEADER: &str = "outer_iter,inner_iter,elapsed_s,mu,delta,f,merit,residual_total,\
grad_lag_norm,compl_norm,min_eig_h,second_order_measure,accepted,status";

/// One row of the run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub elapsed_s: f64,
    pub mu: f64,
    pub delta: f64,
    pub f: f64,
    pub merit: f64,
    pub residual_total: f64,
    pub grad_lag_norm: f64,
    pub compl_norm: f64,
    pub min_eig_h: f64,
    pub second_order_measure: f64,
    pub accepted: bool,
    pub status: String,
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|e| format!("bad float '{other}': {e}")),
    }
}

pub fn emit_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.outer_iter,
            r.inner_iter,
            fmt_f64(r.elapsed_s),
            fmt_f64(r.mu),
            fmt_f64(r.delta),
            fmt_f64(r.f),
            fmt_f64(r.merit),
            fmt_f64(r.residual_total),
            fmt_f64(r.grad_lag_norm),
            fmt_f64(r.compl_norm),
            fmt_f64(r.min_eig_h),
            fmt_f64(r.second_order_measure),
            r.accepted,
            r.status,
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trace file")?;
    if header.trim() != CSV_HEADER {
        return Err(format!("unexpected header: {header}"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(format!(
                "line {}: expected 14 fields, got {}",
                lineno + 2,
                fields.len()
            ));
        }
        out.push(RunRecord {
            outer_iter: fields[0].parse().map_err(|e| format!("line {}: {e}", lineno + 2))?,
            inner_iter: fields[1].parse().map_err(|e| format!("line {}: {e}", lineno + 2))?,
            elapsed_s: parse_f64(fields[2])?,
            mu: parse_f64(fields[3])?,
            delta: parse_f64(fields[4])?,
            f: parse_f64(fields[5])?,
            merit: parse_f64(fields[6])?,
            residual_total: parse_f64(fields[7])?,
            grad_lag_norm: parse_f64(fields[8])?,
            compl_norm: parse_f64(fields[9])?,
            min_eig_h: parse_f64(fields[10])?,
            second_order_measure: parse_f64(fields[11])?,
            accepted: fields[12]
                .parse()
                .map_err(|e| format!("line {}: bad bool: {e}", lineno + 2))?,
            status: fields[13].to_string(),
        });
    }
    Ok(out)
}

/// Solver internals per inner iteration, for `verify`.
#[derive(Debug, Clone)]
pub struct AuxRecord {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub eta: f64,
    pub ared: f64,
    pub pred: f64,
    pub d_norm: f64,
    pub delta_next: f64,
    pub feasible_retraction: bool,
    pub cond_met: bool,
    pub accepted: bool,
    pub dual_raw: Vec<f64>,
    pub dual_carried: Vec<f64>,
    pub clip_lo: Vec<f64>,
    pub clip_hi: Vec<f64>,
}

pub const AUX_HEADER: &str = "outer_iter,inner_iter,eta,ared,pred,d_norm,delta_next,\
feasible_retraction,cond_met,accepted,dual_raw,dual_carried,clip_lo,clip_hi";

fn fmt_vec(v: &[f64]) -> String {
    if v.is_empty() {
        "_".to_string()
    } else {
        v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";")
    }
}

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    if s == "_" {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_f64).collect()
}

pub fn emit_aux(records: &[AuxRecord]) -> String {
    let mut out = String::new();
    out.push_str(AUX_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.outer_iter,
            r.inner_iter,
            fmt_f64(r.eta),
            fmt_f64(r.ared),
            fmt_f64(r.pred),
            fmt_f64(r.d_norm),
            fmt_f64(r.delta_next),
            r.feasible_retraction,
            r.cond_met,
            r.accepted,
            fmt_vec(&r.dual_raw),
            fmt_vec(&r.dual_carried),
            fmt_vec(&r.clip_lo),
            fmt_vec(&r.clip_hi),
        );
    }
    out
}

pub fn parse_aux(text: &str) -> Result<Vec<AuxRecord>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty aux file")?;
    if header.trim() != AUX_HEADER {
        return Err(format!("unexpected aux header: {header}"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(format!("aux line {}: expected 14 fields", lineno + 2));
        }
        let b = |s: &str| -> Result<bool, String> {
            s.parse().map_err(|e| format!("aux line {}: {e}", lineno + 2))
        };
        out.push(AuxRecord {
            outer_iter: f[0].parse().map_err(|e| format!("aux line {}: {e}", lineno + 2))?,
            inner_iter: f[1].parse().map_err(|e| format!("aux line {}: {e}", lineno + 2))?,
            eta: parse_f64(f[2])?,
            ared: parse_f64(f[3])?,
            pred: parse_f64(f[4])?,
            d_norm: parse_f64(f[5])?,
            delta_next: parse_f64(f[6])?,
            feasible_retraction: b(f[7])?,
            cond_met: b(f[8])?,
            accepted: b(f[9])?,
            dual_raw: parse_vec(f[10])?,
            dual_carried: parse_vec(f[11])?,
            clip_lo: parse_vec(f[12])?,
            clip_hi: parse_vec(f[13])?,
        });
    }
    Ok(out)
}

/// Final iterate serialization.
pub fn emit_state(w: &PrimalDualPair) -> String {
    format!(
        "x = {}\nlambda = {}\n",
        fmt_vec(w.x.coords.as_slice()),
        fmt_vec(w.lambda.as_slice())
    )
}

pub fn parse_state(text: &str) -> Result<PrimalDualPair, String> {
    let mut x = None;
    let mut lambda = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("bad state line: {line}"))?;
        match key.trim() {
            "x" => x = Some(parse_vec(value.trim())?),
            "lambda" => lambda = Some(parse_vec(value.trim())?),
            other => return Err(format!("unknown state key: {other}")),
        }
    }
    let x = x.ok_or("state file missing x")?;
    let lambda = lambda.ok_or("state file missing lambda")?;
    Ok(PrimalDualPair::new(
        riptrm::Point::new(DVector::from_vec(x)),
        DVector::from_vec(lambda),
    ))
}
