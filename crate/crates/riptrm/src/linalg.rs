//! Dense linear-algebra kernels: symmetric eigendecomposition, positive
//! definite solves, and thin QR.
//!
//! Everything here operates on `nalgebra` dynamic matrices at desk scale
//! (dimensions up to a few hundred). Inputs that are nominally symmetric are
//! symmetrized before factorization to absorb roundoff; asymmetry beyond
//! `SYMMETRY_TOL` (relative) is rejected.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative threshold below which a triangular diagonal entry counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are ascending; `vectors.column(i)` is the unit eigenvector for
/// `values[i]`, and the columns are mutually orthonormal.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_square(a: &DMatrix<f64>, op: &str) -> Result<(), Error> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "{op}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Symmetrize after checking the asymmetry is within tolerance.
fn symmetrized(a: &DMatrix<f64>, op: &str) -> Result<DMatrix<f64>, Error> {
    check_square(a, op)?;
    let norm = a.norm();
    let asym = (a - a.transpose()).norm();
    if asym > SYMMETRY_TOL * (1.0 + norm) {
        return Err(Error::InvalidInput(format!(
            "{op}: matrix is not symmetric (||A - A^T|| = {asym:.3e}, ||A|| = {norm:.3e})"
        )));
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Full spectrum of a symmetric matrix, eigenvalues ascending.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEig, Error> {
    let sym = symmetrized(a, "sym_eig")?;
    let n = sym.nrows();
    if n == 0 {
        return Ok(SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn solve_posdef(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, Error> {
    let sym = symmetrized(a, "solve_posdef")?;
    if sym.nrows() != b.len() {
        return Err(Error::InvalidInput(format!(
            "solve_posdef: matrix is {}x{} but rhs has length {}",
            sym.nrows(),
            sym.ncols(),
            b.len()
        )));
    }
    let chol = sym.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Thin QR factorization of an `n x k` matrix with `n >= k`.
///
/// `q` is `n x k` with orthonormal columns, `r` is `k x k` upper triangular
/// with nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Thin QR with the nonnegative-diagonal sign convention. Fails on rank
/// deficiency.
pub fn qr_thin(a: &DMatrix<f64>) -> Result<ThinQr, Error> {
    let (n, k) = a.shape();
    if n < k {
        return Err(Error::InvalidInput(format!(
            "qr_thin: need n >= k, got {n}x{k}"
        )));
    }
    let norm = a.norm();
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    debug_assert_eq!(q.shape(), (n, k));
    debug_assert_eq!(r.shape(), (k, k));
    for i in 0..k {
        let d = r[(i, i)];
        if d.abs() <= RANK_TOL * norm.max(1e-300) {
            return Err(Error::RankDeficient {
                index: i,
                value: d.abs(),
            });
        }
        if d < 0.0 {
            for j in i..k {
                r[(i, j)] = -r[(i, j)];
            }
            let col = -q.column(i);
            q.set_column(i, &col);
        }
    }
    Ok(ThinQr { q, r })
}
