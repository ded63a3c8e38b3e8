//! Trust-region subproblem solvers.
//!
//! The subproblem minimizes the quadratic model
//! `m(d) = 0.5 <H d, d> + <phi, d>` over tangent vectors with `||d|| <= Delta`,
//! all inner products taken in the Riemannian metric at the base point.
//!
//! Three solvers are provided:
//! - [`cauchy_step`]: exact minimizer along the steepest-descent ray;
//! - [`truncated_cg`]: Steihaug-Toint truncated conjugate gradients;
//! - [`exact_step`]: global optimum via dense eigendecomposition and a
//!   safeguarded secular-equation solve, with an explicit hard-case branch.
//!
//! [`verify_global_optimality`] checks the four necessary-and-sufficient
//! global optimality conditions of a candidate `(d, nu)` pair: shifted
//! stationarity, complementarity, the norm bound, and positive
//! semidefiniteness of the shifted operator.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg;
use crate::manifold::{Manifold, Point, Tangent};

pub mod bench;

/// Default verification tolerance on unit-scale instances; effective
/// tolerances are scaled by `1 + ||phi|| + ||H||`.
pub const DEFAULT_TOL: f64 = 1e-9;

/// How a subproblem solve terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrsStatus {
    /// Unconstrained minimizer inside the region (`nu = 0`).
    Interior,
    /// Solution on the boundary with a positive shift.
    Boundary,
    /// Gradient orthogonal to the minimal eigenspace; boundary reached by
    /// adding an eigenvector component at `nu = -lambda_min`.
    HardCase,
    /// Truncated CG hit negative curvature and stepped to the boundary.
    NegativeCurvatureBoundary,
    /// Iteration budget exhausted (truncated CG only).
    MaxIter,
}

impl std::fmt::Display for TrsStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TrsStatus::Interior => "interior",
            TrsStatus::Boundary => "boundary",
            TrsStatus::HardCase => "hard-case",
            TrsStatus::NegativeCurvatureBoundary => "negative-curvature-boundary",
            TrsStatus::MaxIter => "max-iter",
        };
        f.write_str(s)
    }
}

/// Result of a subproblem solve.
#[derive(Debug, Clone)]
pub struct TrsSolution {
    pub direction: Tangent,
    /// Multiplier of the norm constraint, when the solver produces one.
    pub nu: Option<f64>,
    pub status: TrsStatus,
    /// `m(0) - m(d)`, nonnegative for any reasonable step.
    pub model_decrease: f64,
    /// `(||d||, m(d))` after every truncated-CG update; empty for the other
    /// solvers.
    pub path: Vec<(f64, f64)>,
}

/// A trust-region subproblem: a self-adjoint operator, a gradient, a radius,
/// and an orthonormal tangent basis for matrix-level queries.
pub struct TrsInstance<'a> {
    pub manifold: &'a Manifold,
    pub point: &'a Point,
    apply_h: &'a dyn Fn(&Tangent) -> Tangent,
    pub grad: Tangent,
    pub radius: f64,
    pub basis: Vec<Tangent>,
}

impl<'a> TrsInstance<'a> {
    pub fn new(
        manifold: &'a Manifold,
        point: &'a Point,
        apply_h: &'a dyn Fn(&Tangent) -> Tangent,
        grad: Tangent,
        radius: f64,
    ) -> Result<Self, Error> {
        if radius <= 0.0 || radius.is_nan() {
            return Err(Error::InvalidInput(format!(
                "trust-region radius must be positive, got {radius}"
            )));
        }
        if !grad.is_based_at(point) {
            return Err(Error::InvalidInput(
                "subproblem gradient not based at the subproblem point".into(),
            ));
        }
        let basis = manifold.tangent_basis(point)?;
        Ok(TrsInstance {
            manifold,
            point,
            apply_h,
            grad,
            radius,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn apply(&self, v: &Tangent) -> Tangent {
        (self.apply_h)(v)
    }

    pub fn inner(&self, u: &Tangent, v: &Tangent) -> Result<f64, Error> {
        self.manifold.inner(self.point, u, v)
    }

    pub fn norm(&self, u: &Tangent) -> Result<f64, Error> {
        self.manifold.norm(self.point, u)
    }

    /// Quadratic model `m(d) = 0.5 <H d, d> + <phi, d>`.
    pub fn model_value(&self, d: &Tangent) -> Result<f64, Error> {
        let hd = self.apply(d);
        Ok(0.5 * self.inner(&hd, d)? + self.inner(&self.grad, d)?)
    }

    /// Coordinates of a tangent vector in the instance basis.
    pub fn coords_of(&self, t: &Tangent) -> Result<DVector<f64>, Error> {
        let mut c = DVector::zeros(self.dim());
        for (i, b) in self.basis.iter().enumerate() {
            c[i] = self.inner(t, b)?;
        }
        Ok(c)
    }

    /// Tangent vector with the given basis coordinates.
    pub fn tangent_from_coords(&self, c: &DVector<f64>) -> Tangent {
        let mut out = self.manifold.zero_tangent(self.point);
        for (i, b) in self.basis.iter().enumerate() {
            out = out.add_scaled(c[i], b);
        }
        out
    }
}

/// Matrix of the operator in the instance basis, symmetrized.
pub fn matrixize(inst: &TrsInstance) -> Result<DMatrix<f64>, Error> {
    let d = inst.dim();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let hb = inst.apply(&inst.basis[j]);
        for i in 0..d {
            m[(i, j)] = inst.inner(&hb, &inst.basis[i])?;
        }
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Smallest eigenvalue of the matrixized operator.
pub fn min_eig(inst: &TrsInstance) -> Result<f64, Error> {
    let m = matrixize(inst)?;
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(linalg::sym_eig(&m)?.values[0])
}

/// Exact minimizer of the model along `-phi` within the region.
pub fn cauchy_step(inst: &TrsInstance) -> Result<TrsSolution, Error> {
    let gnorm = inst.norm(&inst.grad)?;
    if gnorm == 0.0 {
        return Ok(TrsSolution {
            direction: inst.manifold.zero_tangent(inst.point),
            nu: None,
            status: TrsStatus::Interior,
            model_decrease: 0.0,
            path: Vec::new(),
        });
    }
    let hg = inst.apply(&inst.grad);
    let ghg = inst.inner(&hg, &inst.grad)?;
    let t_boundary = inst.radius / gnorm;
    let t = if ghg <= 0.0 {
        t_boundary
    } else {
        (gnorm * gnorm / ghg).min(t_boundary)
    };
    let direction = inst.grad.scaled(-t);
    let status = if t >= t_boundary {
        TrsStatus::Boundary
    } else {
        TrsStatus::Interior
    };
    let model_decrease = -inst.model_value(&direction)?;
    Ok(TrsSolution {
        direction,
        nu: None,
        status,
        model_decrease,
        path: Vec::new(),
    })
}

fn boundary_tau(dp: f64, dd: f64, pp: f64, radius: f64) -> f64 {
    // positive root of ||d + tau p||^2 = radius^2
    let disc = (dp * dp + pp * (radius * radius - dd)).max(0.0);
    (-dp + disc.sqrt()) / pp
}

/// Steihaug-Toint truncated conjugate gradients from the zero vector.
///
/// Stops at the inexactness level `||r|| <= ||r0|| min(kappa, ||r0||^theta)`,
/// at the boundary, or along a direction of nonpositive curvature.
pub fn truncated_cg(
    inst: &TrsInstance,
    kappa: f64,
    theta: f64,
    max_iter: usize,
) -> Result<TrsSolution, Error> {
    let mut d = inst.manifold.zero_tangent(inst.point);
    let mut r = inst.grad.clone(); // residual Hd + phi
    let mut rr = inst.inner(&r, &r)?;
    let r0_norm = rr.sqrt();
    let mut path = Vec::new();
    if r0_norm == 0.0 {
        return Ok(TrsSolution {
            direction: d,
            nu: None,
            status: TrsStatus::Interior,
            model_decrease: 0.0,
            path,
        });
    }
    let stop_tol = r0_norm * kappa.min(r0_norm.powf(theta));
    let mut p = r.scaled(-1.0);
    let mut status = TrsStatus::MaxIter;
    for _ in 0..max_iter {
        let hp = inst.apply(&p);
        let php = inst.inner(&p, &hp)?;
        let dd = inst.inner(&d, &d)?;
        let dp = inst.inner(&d, &p)?;
        let pp = inst.inner(&p, &p)?;
        if php <= 0.0 {
            let tau = boundary_tau(dp, dd, pp, inst.radius);
            d = d.add_scaled(tau, &p);
            status = TrsStatus::NegativeCurvatureBoundary;
            path.push((inst.norm(&d)?, inst.model_value(&d)?));
            break;
        }
        let alpha = rr / php;
        let step_norm_sq = dd + 2.0 * alpha * dp + alpha * alpha * pp;
        if step_norm_sq >= inst.radius * inst.radius {
            let tau = boundary_tau(dp, dd, pp, inst.radius);
            d = d.add_scaled(tau, &p);
            status = TrsStatus::Boundary;
            path.push((inst.norm(&d)?, inst.model_value(&d)?));
            break;
        }
        d = d.add_scaled(alpha, &p);
        r = r.add_scaled(alpha, &hp);
        path.push((inst.norm(&d)?, inst.model_value(&d)?));
        let rr_new = inst.inner(&r, &r)?;
        if rr_new.sqrt() <= stop_tol {
            status = TrsStatus::Interior;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = r.scaled(-1.0).add_scaled(beta, &p);
    }
    let model_decrease = -inst.model_value(&d)?;
    Ok(TrsSolution {
        direction: d,
        nu: None,
        status,
        model_decrease,
        path,
    })
}

/// Global optimum of the subproblem via eigendecomposition.
///
/// Solves the secular equation for the shift by safeguarded Newton/bisection
/// and handles the hard case by augmenting the pseudo-solution with a minimal
/// eigenvector component. The result is self-verified against the global
/// optimality conditions at tolerance `tol` (scaled); a verification failure
/// is reported as an error rather than returned silently.
pub fn exact_step(inst: &TrsInstance, tol: f64) -> Result<TrsSolution, Error> {
    let dim = inst.dim();
    if dim == 0 {
        return Err(Error::InvalidInput(
            "subproblem on a zero-dimensional tangent space".into(),
        ));
    }
    let m = matrixize(inst)?;
    let g = inst.coords_of(&inst.grad)?;
    let eig = linalg::sym_eig(&m)?;
    let lmin = eig.values[0];
    let lmax_abs = eig.values.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let ghat = eig.vectors.transpose() * &g;
    let gnorm = ghat.norm();
    let radius = inst.radius;

    let cluster_tol = 1e-10 * lmax_abs.max(1.0);
    let min_cluster: Vec<usize> = (0..dim)
        .filter(|&i| eig.values[i] <= lmin + cluster_tol)
        .collect();
    let g_min_norm = min_cluster
        .iter()
        .map(|&i| ghat[i] * ghat[i])
        .sum::<f64>()
        .sqrt();
    let orthogonal_to_min = g_min_norm <= 1e-11 * (1.0 + gnorm);

    let nu_lo = (-lmin).max(0.0);
    // Pseudo-solution at nu = nu_lo with minimal-cluster components dropped.
    let mut pseudo = DVector::zeros(dim);
    for i in 0..dim {
        let denom = eig.values[i] + nu_lo;
        if denom > cluster_tol {
            pseudo[i] = -ghat[i] / denom;
        }
    }
    let rho = pseudo.norm();

    let norm_at = |nu: f64| -> f64 {
        (0..dim)
            .map(|i| {
                let den = eig.values[i] + nu;
                let t = ghat[i] / den;
                t * t
            })
            .sum::<f64>()
            .sqrt()
    };

    let (dhat, nu, status) = if lmin > 0.0 && !orthogonal_to_min {
        // Definite operator with a full solve available.
        let full = DVector::from_fn(dim, |i, _| -ghat[i] / eig.values[i]);
        if full.norm() <= radius {
            (full, 0.0, TrsStatus::Interior)
        } else {
            let nu = solve_secular(&eig.values, &ghat, radius, 0.0);
            let d = DVector::from_fn(dim, |i, _| -ghat[i] / (eig.values[i] + nu));
            (d, nu, TrsStatus::Boundary)
        }
    } else if !orthogonal_to_min {
        // Indefinite (or singular) with gradient energy on the minimal
        // eigenspace: the secular equation has a root right of nu_lo.
        let nu = solve_secular(&eig.values, &ghat, radius, nu_lo);
        let d = DVector::from_fn(dim, |i, _| -ghat[i] / (eig.values[i] + nu));
        (d, nu, TrsStatus::Boundary)
    } else {
        // Gradient orthogonal to the minimal eigenspace.
        if lmin >= 0.0 {
            if rho <= radius {
                (pseudo, 0.0, TrsStatus::Interior)
            } else {
                let nu = solve_secular(&eig.values, &ghat, radius, 0.0);
                let d = DVector::from_fn(dim, |i, _| -ghat[i] / (eig.values[i] + nu));
                (d, nu, TrsStatus::Boundary)
            }
        } else if rho <= radius {
            // Hard case: reach the boundary along a minimal eigenvector.
            // `pseudo` lives in eigen coordinates, so the eigenvector
            // contribution is a unit coordinate there; the deterministic
            // sign rule (first nonzero basis coordinate of the added
            // component nonnegative) is read off the basis representation.
            let tau = (radius * radius - rho * rho).max(0.0).sqrt();
            let evec_basis = eig.vectors.column(min_cluster[0]);
            let sign = match evec_basis.iter().find(|c| c.abs() > 1e-14) {
                Some(first) if *first < 0.0 => -1.0,
                _ => 1.0,
            };
            let mut dhat = pseudo;
            dhat[min_cluster[0]] += sign * tau;
            (dhat, nu_lo, TrsStatus::HardCase)
        } else {
            let nu = solve_secular(&eig.values, &ghat, radius, nu_lo);
            let d = DVector::from_fn(dim, |i, _| -ghat[i] / (eig.values[i] + nu));
            (d, nu, TrsStatus::Boundary)
        }
    };

    debug_assert!({
        let n = if nu > nu_lo { norm_at(nu) } else { f64::NAN };
        nu <= nu_lo || (n - radius).abs() <= 1e-8 * radius.max(1.0)
    });

    let coords = &eig.vectors * dhat;
    let direction = inst.tangent_from_coords(&coords);
    let model_decrease = -inst.model_value(&direction)?;
    let report = verify_global_optimality(inst, &direction, nu, tol)?;
    if !report.pass {
        return Err(Error::SolverFailure(format!(
            "exact step failed self-verification: {report:?}"
        )));
    }
    Ok(TrsSolution {
        direction,
        nu: Some(nu),
        status,
        model_decrease,
        path: Vec::new(),
    })
}

/// Root of `||d(nu)|| = radius` for `nu` in `(lower, inf)`, where
/// `d(nu)_i = -g_i / (lambda_i + nu)`. Assumes the norm exceeds `radius`
/// as `nu -> lower+` (guaranteed by the callers' case analysis).
fn solve_secular(values: &DVector<f64>, ghat: &DVector<f64>, radius: f64, lower: f64) -> f64 {
    let dim = values.len();
    let norm_at = |nu: f64| -> f64 {
        (0..dim)
            .map(|i| {
                let t = ghat[i] / (values[i] + nu);
                t * t
            })
            .sum::<f64>()
            .sqrt()
    };
    // Bracket: expand hi until the norm drops below the radius.
    let gnorm = ghat.norm();
    let lmax = values.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let mut hi = (lower + gnorm / radius + lmax).max(lower * 2.0 + 1.0);
    for _ in 0..200 {
        if norm_at(hi) < radius {
            break;
        }
        hi = 2.0 * hi + 1.0;
    }
    let mut lo = lower;
    let mut nu = 0.5 * (lo + hi).max(lower + 1e-300);
    for _ in 0..200 {
        let n = norm_at(nu);
        if !n.is_finite() {
            lo = nu;
            nu = 0.5 * (lo + hi);
            continue;
        }
        if (n - radius).abs() <= 1e-14 * radius {
            break;
        }
        if n > radius {
            lo = nu;
        } else {
            hi = nu;
        }
        // Newton step on 1/n - 1/radius, falling back to bisection when it
        // leaves the bracket.
        let dn_dnu = -(0..dim)
            .map(|i| {
                let den = values[i] + nu;
                ghat[i] * ghat[i] / (den * den * den)
            })
            .sum::<f64>()
            / n;
        let phi = 1.0 / n - 1.0 / radius;
        let dphi = -dn_dnu / (n * n);
        let newton = nu - phi / dphi;
        nu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-16 * (1.0 + nu.abs()) {
            break;
        }
    }
    nu
}

/// Residuals of the global-optimality conditions for a candidate `(d, nu)`.
#[derive(Debug, Clone, Copy)]
pub struct OptimalityReport {
    /// `||(H + nu I) d + phi||`
    pub stationarity: f64,
    /// `|nu (radius - ||d||)|`
    pub complementarity: f64,
    /// `max(0, ||d|| - radius)`
    pub norm_excess: f64,
    /// smallest eigenvalue of `H + nu I`
    pub shifted_min_eig: f64,
    /// scale `1 + ||phi|| + ||H||` used for the pass thresholds
    pub scale: f64,
    pub pass: bool,
}

/// Check the four global-optimality conditions at tolerance `tol`, scaled by
/// `1 + ||phi|| + ||H||`. A failure is a result, not an error.
pub fn verify_global_optimality(
    inst: &TrsInstance,
    d: &Tangent,
    nu: f64,
    tol: f64,
) -> Result<OptimalityReport, Error> {
    let m = matrixize(inst)?;
    let eig = linalg::sym_eig(&m)?;
    let lmax_abs = eig.values.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let gnorm = inst.norm(&inst.grad)?;
    let scale = 1.0 + gnorm + lmax_abs;

    let hd = inst.apply(d);
    let resid = hd.add_scaled(nu, d).plus(&inst.grad);
    let stationarity = inst.norm(&resid)?;
    let dnorm = inst.norm(d)?;
    let complementarity = (nu * (inst.radius - dnorm)).abs();
    let norm_excess = (dnorm - inst.radius).max(0.0);
    let shifted_min_eig = if eig.values.is_empty() {
        f64::INFINITY
    } else {
        eig.values[0] + nu
    };

    let thresh = tol * scale;
    let pass = nu >= -thresh
        && stationarity <= thresh
        && complementarity <= thresh
        && norm_excess <= thresh
        && shifted_min_eig >= -thresh;
    Ok(OptimalityReport {
        stationarity,
        complementarity,
        norm_excess,
        shifted_min_eig,
        scale,
        pass,
    })
}
