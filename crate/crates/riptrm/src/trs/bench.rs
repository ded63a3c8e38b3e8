//! Seeded dense subproblem instances for tests and the benchmark command.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::manifold::{gaussian_matrix, gaussian_vector, Manifold, Point, Tangent};

/// A dense subproblem on `Euclidean(dim)`: explicit matrix, gradient, radius.
#[derive(Debug, Clone)]
pub struct DenseTrs {
    pub manifold: Manifold,
    pub point: Point,
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub radius: f64,
}

impl DenseTrs {
    /// Seeded random instance. Eigenvalues are drawn from `[-2, 2]`; with
    /// `hard_case` the minimum eigenvalue is forced negative, the gradient
    /// is projected off the minimal eigenspace, and the radius is inflated
    /// past the pseudo-solution norm so the eigenvector branch is active.
    pub fn random(seed: u64, dim: usize, hard_case: bool) -> DenseTrs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(dim as u64));
        let q = linalg::qr_thin(&gaussian_matrix(&mut rng, dim, dim))
            .expect("gaussian matrix has full rank")
            .q;
        let mut values = DVector::from_fn(dim, |_, _| 4.0 * rng.gen::<f64>() - 2.0);
        if hard_case {
            // force a strictly negative, isolated minimum eigenvalue
            let mut min_idx = 0;
            for i in 0..dim {
                if values[i] < values[min_idx] {
                    min_idx = i;
                }
            }
            values[min_idx] = values[min_idx].min(-0.5 - rng.gen::<f64>());
            let lmin = values[min_idx];
            let h = &q * DMatrix::from_diagonal(&values) * q.transpose();
            let vmin = q.column(min_idx).into_owned();
            let mut g = gaussian_vector(&mut rng, dim);
            g -= &vmin * vmin.dot(&g);
            // radius beyond the pseudo-solution norm activates the hard case
            let mut rho_sq = 0.0;
            for i in 0..dim {
                if i != min_idx {
                    let c = q.column(i).dot(&g) / (values[i] - lmin);
                    rho_sq += c * c;
                }
            }
            let radius = rho_sq.sqrt() * (1.2 + rng.gen::<f64>()) + 0.1;
            return DenseTrs {
                manifold: Manifold::Euclidean(dim),
                point: Point::new(DVector::zeros(dim)),
                h: (&h + h.transpose()) * 0.5,
                g,
                radius,
            };
        }
        let h = &q * DMatrix::from_diagonal(&values) * q.transpose();
        let g = gaussian_vector(&mut rng, dim) * (0.2 + 1.8 * rng.gen::<f64>());
        let radius = 0.1 + 1.9 * rng.gen::<f64>();
        DenseTrs {
            manifold: Manifold::Euclidean(dim),
            point: Point::new(DVector::zeros(dim)),
            h: (&h + h.transpose()) * 0.5,
            g,
            radius,
        }
    }

    pub fn apply(&self, v: &Tangent) -> Tangent {
        Tangent::new(&self.point, &self.h * &v.ambient)
    }

    pub fn grad_tangent(&self) -> Tangent {
        Tangent::new(&self.point, self.g.clone())
    }

    /// Spectral norm of the matrix.
    pub fn operator_norm(&self) -> f64 {
        linalg::sym_eig(&self.h)
            .map(|e| e.values.iter().fold(0.0f64, |a, &l| a.max(l.abs())))
            .unwrap_or(f64::NAN)
    }
}
