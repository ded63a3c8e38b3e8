//! Matrix manifolds: metric, second-order retraction, tangent projection,
//! orthonormal tangent bases, and Euclidean-to-Riemannian derivative
//! conversion.
//!
//! Points and tangent vectors are stored as flat ambient coordinate vectors;
//! matrix-valued manifolds use column-major layout. A product manifold
//! concatenates the ambient coordinates of its factors.
//!
//! All retractions implemented here are second order: linear spaces retract
//! by addition, the sphere by metric projection, the Grassmann manifold by
//! the polar retraction, and the positive definite cone by the exponential
//! map of the affine-invariant metric.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::linalg;

#[cfg(test)]
mod tests;

/// Absolute tolerance for membership and tangency tests on unit-scale data.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// A point on a manifold, stored in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: DVector<f64>,
}

impl Point {
    pub fn new(coords: DVector<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A tangent vector, carrying the ambient coordinates of its base point so
/// that base-point mismatches are detectable.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: DVector<f64>,
    pub ambient: DVector<f64>,
}

impl Tangent {
    pub fn new(base: &Point, ambient: DVector<f64>) -> Self {
        Tangent {
            base: base.coords.clone(),
            ambient,
        }
    }

    pub fn is_based_at(&self, x: &Point) -> bool {
        self.base == x.coords
    }

    pub fn scaled(&self, t: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            ambient: &self.ambient * t,
        }
    }

    pub fn plus(&self, other: &Tangent) -> Tangent {
        debug_assert_eq!(self.base, other.base, "tangent base mismatch");
        Tangent {
            base: self.base.clone(),
            ambient: &self.ambient + &other.ambient,
        }
    }

    pub fn minus(&self, other: &Tangent) -> Tangent {
        debug_assert_eq!(self.base, other.base, "tangent base mismatch");
        Tangent {
            base: self.base.clone(),
            ambient: &self.ambient - &other.ambient,
        }
    }

    /// `self + t * other`
    pub fn add_scaled(&self, t: f64, other: &Tangent) -> Tangent {
        debug_assert_eq!(self.base, other.base, "tangent base mismatch");
        Tangent {
            base: self.base.clone(),
            ambient: &self.ambient + &other.ambient * t,
        }
    }
}

/// Intrinsic dimension and typical-distance scale of a manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldDescriptor {
    pub dim: usize,
    pub scale: f64,
}

/// The supported manifolds.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    /// R^n with the dot product.
    Euclidean(usize),
    /// Unit sphere in R^n (n >= 2), induced metric, projection retraction.
    Sphere(usize),
    /// Grassmann manifold of k-planes in R^n, represented by orthonormal
    /// n x k matrices; horizontal space X^T V = 0, polar retraction.
    Grassmann { n: usize, k: usize },
    /// Symmetric positive definite n x n matrices with the affine-invariant
    /// metric and the exponential-map retraction.
    SymmetricPositiveDefinite(usize),
    /// Skew-symmetric n x n matrices (a linear space under the Frobenius
    /// metric).
    SkewSymmetric(usize),
    /// Product of manifolds; ambient coordinates are concatenated.
    Product(Vec<Manifold>),
}

use Manifold::*;

fn mat(v: &DVector<f64>, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, k, v.as_slice())
}

fn flat(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn skew(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Standard normal deviate via Box-Muller; deterministic for a seeded rng.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > 1e-300 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
        }
    }
}

/// Vector of i.i.d. standard normal entries.
pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| standard_normal(rng))
}

/// Matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| standard_normal(rng))
}

/// Spectral map of a symmetric matrix: applies `f` to each eigenvalue.
fn spectral_map(
    m: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
    op: &str,
) -> Result<DMatrix<f64>, Error> {
    let eig = linalg::sym_eig(m).map_err(|e| {
        Error::InternalConsistency(format!("{op}: eigendecomposition failed: {e}"))
    })?;
    let mapped = DVector::from_iterator(eig.values.len(), eig.values.iter().map(|&l| f(l)));
    Ok(&eig.vectors * DMatrix::from_diagonal(&mapped) * eig.vectors.transpose())
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal `n x k` matrix, via Gram-Schmidt against the standard basis.
fn orthonormal_complement(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut cols: Vec<DVector<f64>> = x.column_iter().map(|c| c.into_owned()).collect();
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            v /= nv;
            cols.push(v);
        }
    }
    debug_assert_eq!(cols.len(), n);
    DMatrix::from_columns(&cols[k..])
}

impl Manifold {
    /// Validate the structural parameters of the manifold.
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self {
            Euclidean(n) if *n == 0 => bad("Euclidean(0) has no dimension".into()),
            Sphere(n) if *n < 2 => bad(format!("Sphere({n}) needs ambient dimension >= 2")),
            Grassmann { n, k } if *k == 0 || k >= n => {
                bad(format!("Grassmann({n},{k}) needs n > k >= 1"))
            }
            SymmetricPositiveDefinite(n) if *n == 0 => bad("Spd(0) has no dimension".into()),
            SkewSymmetric(n) if *n < 2 => {
                bad(format!("SkewSymmetric({n}) needs n >= 2"))
            }
            Product(fs) => {
                if fs.is_empty() {
                    return bad("empty product manifold".into());
                }
                fs.iter().try_for_each(|f| f.validate())
            }
            _ => Ok(()),
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Euclidean(n) => *n,
            Sphere(n) => n - 1,
            Grassmann { n, k } => k * (n - k),
            SymmetricPositiveDefinite(n) => n * (n + 1) / 2,
            SkewSymmetric(n) => n * (n - 1) / 2,
            Product(fs) => fs.iter().map(|f| f.dim()).sum(),
        }
    }

    /// Length of the ambient coordinate vector.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Euclidean(n) | Sphere(n) => *n,
            Grassmann { n, k } => n * k,
            SymmetricPositiveDefinite(n) | SkewSymmetric(n) => n * n,
            Product(fs) => fs.iter().map(|f| f.ambient_dim()).sum(),
        }
    }

    /// Typical-distance scale, used for default trust-region radii.
    pub fn scale(&self) -> f64 {
        match self {
            Euclidean(_) | SkewSymmetric(_) | SymmetricPositiveDefinite(_) => 1.0,
            Sphere(_) => PI,
            Grassmann { k, .. } => PI * (*k as f64).sqrt(),
            Product(fs) => fs.iter().map(|f| f.scale().powi(2)).sum::<f64>().sqrt(),
        }
    }

    pub fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor {
            dim: self.dim(),
            scale: self.scale(),
        }
    }

    fn factors(&self) -> &[Manifold] {
        match self {
            Product(fs) => fs,
            _ => std::slice::from_ref(self),
        }
    }

    /// Ambient coordinate ranges of the factors (the whole range for a
    /// non-product manifold).
    pub fn slot_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut lo = 0;
        for f in self.factors() {
            let len = f.ambient_dim();
            out.push((lo, len));
            lo += len;
        }
        out
    }

    fn check_shape(&self, len: usize, what: &str) -> Result<(), Error> {
        if len != self.ambient_dim() {
            return Err(Error::InvalidInput(format!(
                "{what}: expected ambient length {}, got {len}",
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    /// Distance of `x` from the manifold's membership conditions. Returns
    /// `+inf` for a positive definite slot whose symmetric part has a
    /// negative eigenvalue.
    pub fn membership_defect(&self, x: &Point) -> f64 {
        if x.coords.len() != self.ambient_dim() || x.coords.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        match self {
            Euclidean(_) => 0.0,
            Sphere(_) => (x.coords.norm() - 1.0).abs(),
            Grassmann { n, k } => {
                let m = mat(&x.coords, *n, *k);
                (m.transpose() * &m - DMatrix::identity(*k, *k)).norm()
            }
            SymmetricPositiveDefinite(n) => {
                let m = mat(&x.coords, *n, *n);
                let asym = (&m - m.transpose()).norm();
                let eig = match linalg::sym_eig(&sym(&m)) {
                    Ok(e) => e,
                    Err(_) => return f64::INFINITY,
                };
                if eig.values[0] < 0.0 {
                    f64::INFINITY
                } else {
                    asym
                }
            }
            SkewSymmetric(n) => {
                let m = mat(&x.coords, *n, *n);
                (&m + m.transpose()).norm()
            }
            Product(fs) => {
                let mut total = 0.0;
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let slot = Point::new(x.coords.rows(lo, len).into_owned());
                    total += f.membership_defect(&slot);
                }
                total
            }
        }
    }

    /// Membership test at tolerance [`MEMBERSHIP_TOL`]. Positive definite
    /// slots additionally require a strictly positive minimum eigenvalue.
    pub fn check_point(&self, x: &Point) -> Result<(), Error> {
        self.check_shape(x.coords.len(), "check_point")?;
        match self {
            SymmetricPositiveDefinite(n) => {
                let m = mat(&x.coords, *n, *n);
                let asym = (&m - m.transpose()).norm();
                if asym > MEMBERSHIP_TOL {
                    return Err(Error::InvalidInput(format!(
                        "point is not symmetric: ||X - X^T|| = {asym:.3e}"
                    )));
                }
                let eig = linalg::sym_eig(&sym(&m))?;
                if eig.values[0] <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "point is not positive definite: min eigenvalue = {:.3e}",
                        eig.values[0]
                    )));
                }
                Ok(())
            }
            Product(fs) => {
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let slot = Point::new(x.coords.rows(lo, len).into_owned());
                    f.check_point(&slot)?;
                }
                Ok(())
            }
            _ => {
                let defect = self.membership_defect(x);
                if defect > MEMBERSHIP_TOL {
                    return Err(Error::InvalidInput(format!(
                        "point fails membership test: defect = {defect:.3e}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Tangency test: `v` must be based at `x` and fixed by the tangent
    /// projection.
    pub fn check_tangent(&self, x: &Point, v: &Tangent) -> Result<(), Error> {
        if !v.is_based_at(x) {
            return Err(Error::InvalidInput("tangent base-point mismatch".into()));
        }
        let p = self.project_tangent(x, &v.ambient)?;
        let defect = (&p.ambient - &v.ambient).norm();
        if defect > MEMBERSHIP_TOL * (1.0 + v.ambient.norm()) {
            return Err(Error::InvalidInput(format!(
                "vector is not tangent: projection defect = {defect:.3e}"
            )));
        }
        Ok(())
    }

    /// Riemannian inner product of two tangent vectors at `x`.
    pub fn inner(&self, x: &Point, u: &Tangent, v: &Tangent) -> Result<f64, Error> {
        self.check_shape(x.coords.len(), "inner")?;
        if !u.is_based_at(x) || !v.is_based_at(x) {
            return Err(Error::InvalidInput(
                "inner: tangent base-point mismatch".into(),
            ));
        }
        self.inner_unchecked(x, &u.ambient, &v.ambient)
    }

    fn inner_unchecked(
        &self,
        x: &Point,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<f64, Error> {
        match self {
            Euclidean(_) | Sphere(_) | Grassmann { .. } | SkewSymmetric(_) => Ok(u.dot(v)),
            SymmetricPositiveDefinite(n) => {
                let xm = sym(&mat(&x.coords, *n, *n));
                let chol = xm.cholesky().ok_or(Error::NotPositiveDefinite)?;
                let a = chol.solve(&mat(u, *n, *n));
                let b = chol.solve(&mat(v, *n, *n));
                // tr(X^-1 U X^-1 V)
                Ok((&a * &b).trace())
            }
            Product(fs) => {
                let mut total = 0.0;
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let xs = Point::new(x.coords.rows(lo, len).into_owned());
                    total += f.inner_unchecked(
                        &xs,
                        &u.rows(lo, len).into_owned(),
                        &v.rows(lo, len).into_owned(),
                    )?;
                }
                Ok(total)
            }
        }
    }

    /// Riemannian norm of a tangent vector.
    pub fn norm(&self, x: &Point, u: &Tangent) -> Result<f64, Error> {
        Ok(self.inner(x, u, u)?.max(0.0).sqrt())
    }

    /// Second-order retraction of `v` at `x`.
    pub fn retract(&self, x: &Point, v: &Tangent) -> Result<Point, Error> {
        self.check_shape(x.coords.len(), "retract")?;
        if !v.is_based_at(x) {
            return Err(Error::InvalidInput(
                "retract: tangent base-point mismatch".into(),
            ));
        }
        if v.ambient.iter().all(|&c| c == 0.0) {
            return Ok(x.clone());
        }
        let out = self.retract_unchecked(x, &v.ambient)?;
        // Retractions are numerically tight; a failed membership test here
        // indicates a corrupted input rather than roundoff.
        if self.membership_defect(&out) > 1e-8 * (1.0 + out.coords.norm()) {
            return Err(Error::InternalConsistency(
                "retraction left the manifold".into(),
            ));
        }
        Ok(out)
    }

    fn retract_unchecked(&self, x: &Point, v: &DVector<f64>) -> Result<Point, Error> {
        match self {
            Euclidean(_) | SkewSymmetric(_) => Ok(Point::new(&x.coords + v)),
            Sphere(_) => {
                let y = &x.coords + v;
                let n = y.norm();
                if n < 1e-300 {
                    return Err(Error::InternalConsistency(
                        "sphere retraction through the origin".into(),
                    ));
                }
                Ok(Point::new(y / n))
            }
            Grassmann { n, k } => {
                // Polar retraction: (X + V)(I + V^T V)^{-1/2}.
                let xm = mat(&x.coords, *n, *k);
                let vm = mat(v, *n, *k);
                let y = &xm + &vm;
                let gram = DMatrix::identity(*k, *k) + vm.transpose() * &vm;
                let inv_sqrt = spectral_map(&gram, |l| 1.0 / l.max(1e-300).sqrt(), "polar")?;
                Ok(Point::new(flat(&(y * inv_sqrt))))
            }
            SymmetricPositiveDefinite(n) => {
                // X^{1/2} expm(X^{-1/2} V X^{-1/2}) X^{1/2}
                let xm = sym(&mat(&x.coords, *n, *n));
                let vm = sym(&mat(v, *n, *n));
                let sqrt_x = spectral_map(&xm, |l| l.max(0.0).sqrt(), "spd retract")?;
                let inv_sqrt_x = spectral_map(&xm, |l| 1.0 / l.max(1e-300).sqrt(), "spd retract")?;
                let s = sym(&(&inv_sqrt_x * &vm * &inv_sqrt_x));
                let e = spectral_map(&s, f64::exp, "spd retract")?;
                Ok(Point::new(flat(&sym(&(&sqrt_x * e * &sqrt_x)))))
            }
            Product(fs) => {
                let mut out = DVector::zeros(self.ambient_dim());
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let xs = Point::new(x.coords.rows(lo, len).into_owned());
                    let ys = f.retract_unchecked(&xs, &v.rows(lo, len).into_owned())?;
                    out.rows_mut(lo, len).copy_from(&ys.coords);
                }
                Ok(Point::new(out))
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn project_tangent(&self, x: &Point, a: &DVector<f64>) -> Result<Tangent, Error> {
        self.check_shape(x.coords.len(), "project_tangent")?;
        self.check_shape(a.len(), "project_tangent")?;
        let ambient = self.project_unchecked(x, a);
        Ok(Tangent {
            base: x.coords.clone(),
            ambient,
        })
    }

    fn project_unchecked(&self, x: &Point, a: &DVector<f64>) -> DVector<f64> {
        match self {
            Euclidean(_) => a.clone(),
            Sphere(_) => a - &x.coords * x.coords.dot(a),
            Grassmann { n, k } => {
                let xm = mat(&x.coords, *n, *k);
                let am = mat(a, *n, *k);
                let horiz = &am - &xm * (xm.transpose() * &am);
                flat(&horiz)
            }
            SymmetricPositiveDefinite(n) => flat(&sym(&mat(a, *n, *n))),
            SkewSymmetric(n) => flat(&skew(&mat(a, *n, *n))),
            Product(fs) => {
                let mut out = DVector::zeros(self.ambient_dim());
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let xs = Point::new(x.coords.rows(lo, len).into_owned());
                    let p = f.project_unchecked(&xs, &a.rows(lo, len).into_owned());
                    out.rows_mut(lo, len).copy_from(&p);
                }
                out
            }
        }
    }

    /// Ordered orthonormal basis of the tangent space at `x`.
    pub fn tangent_basis(&self, x: &Point) -> Result<Vec<Tangent>, Error> {
        self.check_shape(x.coords.len(), "tangent_basis")?;
        let raw = self.basis_unchecked(x)?;
        Ok(raw
            .into_iter()
            .map(|ambient| Tangent {
                base: x.coords.clone(),
                ambient,
            })
            .collect())
    }

    fn basis_unchecked(&self, x: &Point) -> Result<Vec<DVector<f64>>, Error> {
        match self {
            Euclidean(n) => Ok((0..*n)
                .map(|i| {
                    let mut e = DVector::zeros(*n);
                    e[i] = 1.0;
                    e
                })
                .collect()),
            Sphere(n) => {
                // Columns 2..n of the Householder reflector sending x to
                // -sign(x_1) e_1 are orthonormal and orthogonal to x.
                let xc = &x.coords;
                let s = if xc[0] >= 0.0 { 1.0 } else { -1.0 };
                let mut w = xc.clone();
                w[0] += s * xc.norm();
                let wn2 = w.norm_squared().max(1e-300);
                let mut out = Vec::with_capacity(n - 1);
                for j in 1..*n {
                    let mut e = DVector::zeros(*n);
                    e[j] = 1.0;
                    let coef = 2.0 * w[j] / wn2;
                    out.push(e - &w * coef);
                }
                Ok(out)
            }
            Grassmann { n, k } => {
                let xm = mat(&x.coords, *n, *k);
                let perp = orthonormal_complement(&xm);
                let mut out = Vec::with_capacity(k * (n - k));
                for a in 0..(n - k) {
                    for b in 0..*k {
                        let mut m = DMatrix::zeros(*n, *k);
                        m.set_column(b, &perp.column(a));
                        out.push(flat(&m));
                    }
                }
                Ok(out)
            }
            SymmetricPositiveDefinite(n) => {
                // X^{1/2} S X^{1/2} over a Frobenius-orthonormal symmetric
                // basis S is orthonormal for the affine-invariant metric.
                let xm = sym(&mat(&x.coords, *n, *n));
                let sqrt_x = spectral_map(&xm, |l| l.max(0.0).sqrt(), "spd basis")?;
                let mut out = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..*n {
                    let mut s = DMatrix::zeros(*n, *n);
                    s[(i, i)] = 1.0;
                    out.push(flat(&(&sqrt_x * s * &sqrt_x)));
                }
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..*n {
                    for j in (i + 1)..*n {
                        let mut s = DMatrix::zeros(*n, *n);
                        s[(i, j)] = inv_sqrt2;
                        s[(j, i)] = inv_sqrt2;
                        out.push(flat(&(&sqrt_x * s * &sqrt_x)));
                    }
                }
                Ok(out)
            }
            SkewSymmetric(n) => {
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                let mut out = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..*n {
                    for j in (i + 1)..*n {
                        let mut s = DMatrix::zeros(*n, *n);
                        s[(i, j)] = inv_sqrt2;
                        s[(j, i)] = -inv_sqrt2;
                        out.push(flat(&s));
                    }
                }
                Ok(out)
            }
            Product(fs) => {
                let total = self.ambient_dim();
                let mut out = Vec::with_capacity(self.dim());
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let xs = Point::new(x.coords.rows(lo, len).into_owned());
                    for b in f.basis_unchecked(&xs)? {
                        let mut v = DVector::zeros(total);
                        v.rows_mut(lo, len).copy_from(&b);
                        out.push(v);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Convert the ambient gradient of a smooth extension into the
    /// Riemannian gradient.
    pub fn egrad_to_rgrad(&self, x: &Point, egrad: &DVector<f64>) -> Result<Tangent, Error> {
        self.check_shape(x.coords.len(), "egrad_to_rgrad")?;
        self.check_shape(egrad.len(), "egrad_to_rgrad")?;
        let ambient = self.rgrad_unchecked(x, egrad)?;
        Ok(Tangent {
            base: x.coords.clone(),
            ambient,
        })
    }

    fn rgrad_unchecked(&self, x: &Point, egrad: &DVector<f64>) -> Result<DVector<f64>, Error> {
        match self {
            SymmetricPositiveDefinite(n) => {
                let xm = sym(&mat(&x.coords, *n, *n));
                let g = sym(&mat(egrad, *n, *n));
                Ok(flat(&(&xm * g * &xm)))
            }
            Product(fs) => {
                let mut out = DVector::zeros(self.ambient_dim());
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let xs = Point::new(x.coords.rows(lo, len).into_owned());
                    let g = f.rgrad_unchecked(&xs, &egrad.rows(lo, len).into_owned())?;
                    out.rows_mut(lo, len).copy_from(&g);
                }
                Ok(out)
            }
            _ => Ok(self.project_unchecked(x, egrad)),
        }
    }

    /// Convert Euclidean second-order data into the Riemannian Hessian
    /// applied to `v`. `ehess_v` must be the directional derivative of the
    /// ambient gradient along `v`.
    pub fn ehess_to_rhess(
        &self,
        x: &Point,
        egrad: &DVector<f64>,
        ehess_v: &DVector<f64>,
        v: &Tangent,
    ) -> Result<Tangent, Error> {
        self.check_shape(x.coords.len(), "ehess_to_rhess")?;
        self.check_shape(egrad.len(), "ehess_to_rhess")?;
        self.check_shape(ehess_v.len(), "ehess_to_rhess")?;
        if !v.is_based_at(x) {
            return Err(Error::InvalidInput(
                "ehess_to_rhess: tangent base-point mismatch".into(),
            ));
        }
        let ambient = self.rhess_unchecked(x, egrad, ehess_v, &v.ambient)?;
        Ok(Tangent {
            base: x.coords.clone(),
            ambient,
        })
    }

    fn rhess_unchecked(
        &self,
        x: &Point,
        egrad: &DVector<f64>,
        ehess_v: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, Error> {
        match self {
            Euclidean(_) => Ok(ehess_v.clone()),
            SkewSymmetric(_) => Ok(self.project_unchecked(x, ehess_v)),
            Sphere(_) => {
                let proj = self.project_unchecked(x, ehess_v);
                Ok(proj - v * x.coords.dot(egrad))
            }
            Grassmann { n, k } => {
                let xm = mat(&x.coords, *n, *k);
                let gm = mat(egrad, *n, *k);
                let hm = mat(ehess_v, *n, *k);
                let vm = mat(v, *n, *k);
                let proj = &hm - &xm * (xm.transpose() * &hm);
                // The curvature correction uses the symmetric part of X^T G.
                // For costs that are invariant along the fibre the product is
                // already symmetric; for general representative-dependent
                // costs the skew part contributes nothing to second-order
                // Taylor expansions along retractions but would break the
                // self-adjointness of the Hessian operator.
                let xg = sym(&(xm.transpose() * gm));
                Ok(flat(&(proj - vm * xg)))
            }
            SymmetricPositiveDefinite(n) => {
                let xm = sym(&mat(&x.coords, *n, *n));
                let g = sym(&mat(egrad, *n, *n));
                let h = sym(&mat(ehess_v, *n, *n));
                let vm = sym(&mat(v, *n, *n));
                let out = &xm * &h * &xm + sym(&(&vm * &g * &xm));
                Ok(flat(&out))
            }
            Product(fs) => {
                let mut out = DVector::zeros(self.ambient_dim());
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let xs = Point::new(x.coords.rows(lo, len).into_owned());
                    let h = f.rhess_unchecked(
                        &xs,
                        &egrad.rows(lo, len).into_owned(),
                        &ehess_v.rows(lo, len).into_owned(),
                        &v.rows(lo, len).into_owned(),
                    )?;
                    out.rows_mut(lo, len).copy_from(&h);
                }
                Ok(out)
            }
        }
    }

    /// Deterministic random point; identical seeds give identical points.
    pub fn sample_point(&self, seed: u64) -> Point {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_point_with(&mut rng)
    }

    fn sample_point_with<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            Euclidean(n) => Point::new(gaussian_vector(rng, *n)),
            Sphere(n) => {
                let g = gaussian_vector(rng, *n);
                let norm = g.norm().max(1e-300);
                Point::new(g / norm)
            }
            Grassmann { n, k } => {
                let g = gaussian_matrix(rng, *n, *k);
                let q = linalg::qr_thin(&g)
                    .expect("gaussian matrix is full rank almost surely")
                    .q;
                Point::new(flat(&q))
            }
            SymmetricPositiveDefinite(n) => {
                let g = gaussian_matrix(rng, *n, *n) / (*n as f64).sqrt();
                let x = &g * g.transpose() + DMatrix::identity(*n, *n) * 0.5;
                Point::new(flat(&sym(&x)))
            }
            SkewSymmetric(n) => {
                let g = gaussian_matrix(rng, *n, *n);
                Point::new(flat(&skew(&g)))
            }
            Product(fs) => {
                let mut out = DVector::zeros(self.ambient_dim());
                for (f, (lo, len)) in fs.iter().zip(self.slot_ranges()) {
                    let p = f.sample_point_with(rng);
                    out.rows_mut(lo, len).copy_from(&p.coords);
                }
                Point::new(out)
            }
        }
    }

    /// Deterministic random tangent vector at `x`.
    pub fn sample_tangent(&self, x: &Point, seed: u64) -> Result<Tangent, Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian_vector(&mut rng, self.ambient_dim());
        self.project_tangent(x, &a)
    }

    /// The zero tangent vector at `x`.
    pub fn zero_tangent(&self, x: &Point) -> Tangent {
        Tangent {
            base: x.coords.clone(),
            ambient: DVector::zeros(self.ambient_dim()),
        }
    }
}
