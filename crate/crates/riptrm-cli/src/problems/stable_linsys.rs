//! Stable linear system identification with entrywise prior knowledge.
//!
//! The system matrix is parameterized as `A = (J - R) Q` over the product
//! manifold Skew(n) x Spd(n) x Spd(n), which makes every iterate stable by
//! construction. The objective is the normalized sum of one-step prediction
//! residual norms over a synthetic trajectory; the constraints are box
//! bounds on selected entries of `A` plus ring (two-sided exclusion)
//! constraints on a second index set.
//!
//! All data are generated from the seed in the spec: a random stable truth,
//! a noisy trajectory, random disjoint index sets, and bounds placed around
//! the true entries so the truth is strictly feasible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riptrm::manifold::{gaussian_matrix, gaussian_vector};
use riptrm::{Error, FunctionOracle, Manifold, Point, RicoProblem};

#[derive(Debug, Clone, Copy)]
pub struct StableLinSysSpec {
    /// State dimension.
    pub n: usize,
    /// Sampling interval.
    pub h: f64,
    /// Number of observed transitions; states x_0..x_{n_obs} are generated.
    pub n_obs: usize,
    /// |I1| = floor(frac1 * n^2).
    pub frac1: f64,
    /// |I2| = floor(frac2 * n^2).
    pub frac2: f64,
    /// Standard deviation of the per-step observation noise.
    pub noise_sigma: f64,
    /// Use squared residual norms (a smooth least-squares data fit). The
    /// raw sum-of-norms variant is kept for experimentation; its optimum
    /// generically sits where individual residuals vanish, so first-order
    /// stationarity cannot be certified to tight tolerances there.
    pub squared_loss: bool,
    pub seed: u64,
}

impl Default for StableLinSysSpec {
    fn default() -> Self {
        StableLinSysSpec {
            n: 5,
            h: 0.02,
            n_obs: 20,
            frac1: 0.2,
            frac2: 0.1,
            noise_sigma: 1e-3,
            squared_loss: true,
            seed: 0,
        }
    }
}

/// Ground truth and generated observations.
#[derive(Debug, Clone)]
pub struct StableLinSysData {
    pub a_true: DMatrix<f64>,
    /// True (J, R, Q) as a product-manifold point.
    pub x_true: Point,
    /// States x_0 .. x_{n_obs}.
    pub states: Vec<DVector<f64>>,
    pub i1: Vec<(usize, usize)>,
    pub i2: Vec<(usize, usize)>,
    pub lower: f64,
    pub upper: f64,
    /// Ring centers, one per entry of `i2` (same order).
    pub ring_centers: Vec<f64>,
    pub ring_radius: f64,
}

fn unpack(coords: &DVector<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let nn = n * n;
    let j = DMatrix::from_column_slice(n, n, &coords.as_slice()[0..nn]);
    let r = DMatrix::from_column_slice(n, n, &coords.as_slice()[nn..2 * nn]);
    let q = DMatrix::from_column_slice(n, n, &coords.as_slice()[2 * nn..3 * nn]);
    (j, r, q)
}

fn pack(j: &DMatrix<f64>, r: &DMatrix<f64>, q: &DMatrix<f64>) -> DVector<f64> {
    let n = j.nrows();
    let nn = n * n;
    let mut out = DVector::zeros(3 * nn);
    out.rows_mut(0, nn).copy_from_slice(j.as_slice());
    out.rows_mut(nn, nn).copy_from_slice(r.as_slice());
    out.rows_mut(2 * nn, nn).copy_from_slice(q.as_slice());
    out
}

/// Entry kind for the inequality list.
#[derive(Debug, Clone, Copy)]
enum ConstraintKind {
    Lower,
    Upper,
    Ring { center: f64, radius: f64 },
}

fn entry_constraint(
    n: usize,
    i: usize,
    j: usize,
    bound: f64,
    kind: ConstraintKind,
) -> FunctionOracle {
    // a = e_i^T (J - R) Q e_j with exact first and second derivatives
    let a_of = move |coords: &DVector<f64>| -> f64 {
        let (jm, rm, qm) = unpack(coords, n);
        ((jm - rm) * qm.column(j))[i]
    };
    let grad_of = move |coords: &DVector<f64>| -> DVector<f64> {
        let (jm, rm, qm) = unpack(coords, n);
        let qcol = qm.column(j).into_owned();
        let mut dj = DMatrix::zeros(n, n);
        let mut dr = DMatrix::zeros(n, n);
        let mut dq = DMatrix::zeros(n, n);
        for p in 0..n {
            dj[(i, p)] = qcol[p];
            dr[(i, p)] = -qcol[p];
        }
        let jr_row = (jm - rm).row(i).transpose();
        dq.set_column(j, &jr_row);
        pack(&dj, &dr, &dq)
    };
    let hess_of = move |v: &DVector<f64>| -> DVector<f64> {
        let (vj, vr, vq) = unpack(v, n);
        let vqcol = vq.column(j).into_owned();
        let mut dj = DMatrix::zeros(n, n);
        let mut dr = DMatrix::zeros(n, n);
        let mut dq = DMatrix::zeros(n, n);
        for p in 0..n {
            dj[(i, p)] = vqcol[p];
            dr[(i, p)] = -vqcol[p];
        }
        let vjr_row = (vj - vr).row(i).transpose();
        dq.set_column(j, &vjr_row);
        pack(&dj, &dr, &dq)
    };

    match kind {
        ConstraintKind::Lower => FunctionOracle::new(
            move |x: &Point| a_of(&x.coords) - bound,
            move |x: &Point| grad_of(&x.coords),
            move |_x: &Point, v: &DVector<f64>| hess_of(v),
        ),
        ConstraintKind::Upper => FunctionOracle::new(
            move |x: &Point| bound - a_of(&x.coords),
            move |x: &Point| -grad_of(&x.coords),
            move |_x: &Point, v: &DVector<f64>| -hess_of(v),
        ),
        ConstraintKind::Ring { center, radius } => FunctionOracle::new(
            move |x: &Point| {
                let d = a_of(&x.coords) - center;
                d * d - radius * radius
            },
            move |x: &Point| {
                let d = a_of(&x.coords) - center;
                grad_of(&x.coords) * (2.0 * d)
            },
            move |x: &Point, v: &DVector<f64>| {
                let d = a_of(&x.coords) - center;
                let g = grad_of(&x.coords);
                let da = g.dot(v);
                g * (2.0 * da) + hess_of(v) * (2.0 * d)
            },
        ),
    }
}

pub fn build_stable_linsys(
    spec: &StableLinSysSpec,
) -> Result<(RicoProblem, StableLinSysData), Error> {
    let StableLinSysSpec {
        n,
        h,
        n_obs,
        frac1,
        frac2,
        noise_sigma,
        squared_loss,
        seed,
    } = *spec;
    if n == 0 || n_obs < 2 {
        return Err(Error::InvalidInput(
            "stable-linsys needs n >= 1 and at least two observations".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // ground truth on the manifold
    let b = gaussian_matrix(&mut rng, n, n);
    let j_true = (&b - b.transpose()) * 0.5;
    let b = gaussian_matrix(&mut rng, n, n);
    let r_true = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
    let b = gaussian_matrix(&mut rng, n, n);
    let q_true = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
    let a_true = (&j_true - &r_true) * &q_true;

    // trajectory x_{t+1} = (I + h A) x_t + noise
    let g0 = gaussian_vector(&mut rng, n);
    let x0 = &g0 / g0.norm() * (n as f64).sqrt();
    let step = DMatrix::identity(n, n) + &a_true * h;
    let mut states = Vec::with_capacity(n_obs + 1);
    states.push(x0.clone());
    for _ in 0..n_obs {
        let prev = states.last().unwrap();
        let mut next = &step * prev;
        if noise_sigma > 0.0 {
            next += gaussian_vector(&mut rng, n) * noise_sigma;
        }
        states.push(next);
    }

    // disjoint index sets, Fisher-Yates over the n^2 grid
    let m1 = ((frac1 * (n * n) as f64).floor() as usize).min(n * n);
    let m2 = ((frac2 * (n * n) as f64).floor() as usize).min(n * n - m1);
    let mut cells: Vec<(usize, usize)> = (0..n * n).map(|c| (c / n, c % n)).collect();
    for i in (1..cells.len()).rev() {
        let pick = rng.gen_range(0..=i);
        cells.swap(i, pick);
    }
    let mut i1: Vec<(usize, usize)> = cells[0..m1].to_vec();
    let mut i2: Vec<(usize, usize)> = cells[m1..m1 + m2].to_vec();
    i1.sort_unstable();
    i2.sort_unstable();

    // box bounds with margin around the true entries of both sets
    let selected: Vec<f64> = i1
        .iter()
        .chain(i2.iter())
        .map(|&(i, j)| a_true[(i, j)])
        .collect();
    let lower = selected.iter().cloned().fold(f64::INFINITY, f64::min) - 0.1;
    let upper = selected.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.1;

    // ring constraints centered two radii away from the true entry
    let ring_radius = 0.05;
    let ring_centers: Vec<f64> = i2
        .iter()
        .map(|&(i, j)| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            a_true[(i, j)] + sign * 2.0 * ring_radius
        })
        .collect();

    // the truth must satisfy everything strictly
    let mut union: Vec<(usize, usize)> = i1.iter().chain(i2.iter()).cloned().collect();
    union.sort_unstable();
    for &(i, j) in &union {
        let a = a_true[(i, j)];
        if !(lower < a && a < upper) {
            return Err(Error::InternalConsistency(format!(
                "generated box bounds exclude the truth at ({i},{j})"
            )));
        }
    }
    for (idx, &(i, j)) in i2.iter().enumerate() {
        let d = a_true[(i, j)] - ring_centers[idx];
        if d * d <= ring_radius * ring_radius {
            return Err(Error::InternalConsistency(format!(
                "generated ring excludes the truth at ({i},{j})"
            )));
        }
    }

    // objective: (1 / (N ||x_0||)) sum_{t=1}^{N-1} || x_{t+1} - (I + h A) x_t ||
    let norm_scale = 1.0 / (n_obs as f64 * x0.norm());
    let states_v = states.clone();
    let states_g = states.clone();
    let states_h = states.clone();
    let value = move |x: &Point| {
        let (jm, rm, qm) = unpack(&x.coords, n);
        let m = DMatrix::identity(n, n) + (&jm - &rm) * &qm * h;
        let mut total = 0.0;
        for t in 1..n_obs {
            let nr = (&states_v[t + 1] - &m * &states_v[t]).norm();
            total += if squared_loss { nr * nr } else { nr };
        }
        total * norm_scale
    };
    let egrad = move |x: &Point| {
        let (jm, rm, qm) = unpack(&x.coords, n);
        let jr = &jm - &rm;
        let m = DMatrix::identity(n, n) + &jr * &qm * h;
        let mut acc_j = DMatrix::zeros(n, n);
        let mut acc_q = DMatrix::zeros(n, n);
        for t in 1..n_obs {
            let resid = &states_g[t + 1] - &m * &states_g[t];
            // d||r|| pulls back through u = r/||r||; d||r||^2 through 2r
            let u = if squared_loss {
                resid * 2.0
            } else {
                let nr = resid.norm();
                if nr < 1e-300 {
                    continue;
                }
                resid / nr
            };
            let w = &qm * &states_g[t];
            acc_j += &u * w.transpose();
            acc_q += jr.transpose() * &u * states_g[t].transpose();
        }
        let dj = &acc_j * (-h * norm_scale);
        let dr = &acc_j * (h * norm_scale);
        let dq = &acc_q * (-h * norm_scale);
        pack(&dj, &dr, &dq)
    };
    let ehess = move |x: &Point, v: &DVector<f64>| {
        let (jm, rm, qm) = unpack(&x.coords, n);
        let (vj, vr, vq) = unpack(v, n);
        let jr = &jm - &rm;
        let vjr = &vj - &vr;
        let m = DMatrix::identity(n, n) + &jr * &qm * h;
        let dm = (&vjr * &qm + &jr * &vq) * h;
        let mut acc_j = DMatrix::zeros(n, n);
        let mut acc_q = DMatrix::zeros(n, n);
        for t in 1..n_obs {
            let resid = &states_h[t + 1] - &m * &states_h[t];
            let dresid = -(&dm * &states_h[t]);
            let (u, du) = if squared_loss {
                (resid * 2.0, &dresid * 2.0)
            } else {
                let nr = resid.norm();
                if nr < 1e-300 {
                    continue;
                }
                let u = resid / nr;
                let du = (&dresid - &u * u.dot(&dresid)) / nr;
                (u, du)
            };
            let w = &qm * &states_h[t];
            let dw = &vq * &states_h[t];
            acc_j += &du * w.transpose() + &u * dw.transpose();
            acc_q += vjr.transpose() * &u * states_h[t].transpose()
                + jr.transpose() * &du * states_h[t].transpose();
        }
        let dj = &acc_j * (-h * norm_scale);
        let dr = &acc_j * (h * norm_scale);
        let dq = &acc_q * (-h * norm_scale);
        pack(&dj, &dr, &dq)
    };
    let objective = FunctionOracle::new(value, egrad, ehess);

    // constraint list: box pairs over I1 u I2, then rings over I2
    let mut constraints = Vec::with_capacity(2 * union.len() + i2.len());
    for &(i, j) in &union {
        constraints.push(entry_constraint(n, i, j, lower, ConstraintKind::Lower));
        constraints.push(entry_constraint(n, i, j, upper, ConstraintKind::Upper));
    }
    for (idx, &(i, j)) in i2.iter().enumerate() {
        constraints.push(entry_constraint(
            n,
            i,
            j,
            0.0,
            ConstraintKind::Ring {
                center: ring_centers[idx],
                radius: ring_radius,
            },
        ));
    }

    let manifold = Manifold::Product(vec![
        Manifold::SkewSymmetric(n),
        Manifold::SymmetricPositiveDefinite(n),
        Manifold::SymmetricPositiveDefinite(n),
    ]);
    let problem = RicoProblem::new(manifold, objective, constraints)?;
    let data = StableLinSysData {
        a_true,
        x_true: Point::new(pack(&j_true, &r_true, &q_true)),
        states,
        i1,
        i2,
        lower,
        upper,
        ring_centers,
        ring_radius,
    };
    Ok((problem, data))
}
