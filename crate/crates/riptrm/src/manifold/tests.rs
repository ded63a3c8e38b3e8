use super::*;

/// Cubic polynomial test function on the ambient space, with exact ambient
/// derivatives: f(a) = c <w,a> + <u,a>^2 + <w,a>^3.
struct Poly {
    c: f64,
    w: DVector<f64>,
    u: DVector<f64>,
}

impl Poly {
    fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Poly {
            c: 0.7,
            w: gaussian_vector(&mut rng, dim),
            u: gaussian_vector(&mut rng, dim),
        }
    }

    fn value(&self, a: &DVector<f64>) -> f64 {
        let wa = self.w.dot(a);
        let ua = self.u.dot(a);
        self.c * wa + ua * ua + wa * wa * wa
    }

    fn egrad(&self, a: &DVector<f64>) -> DVector<f64> {
        let wa = self.w.dot(a);
        let ua = self.u.dot(a);
        &self.w * self.c + &self.u * (2.0 * ua) + &self.w * (3.0 * wa * wa)
    }

    fn ehess_apply(&self, a: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let wa = self.w.dot(a);
        let wv = self.w.dot(v);
        let uv = self.u.dot(v);
        &self.u * (2.0 * uv) + &self.w * (6.0 * wa * wv)
    }
}

fn all_manifolds() -> Vec<Manifold> {
    vec![
        Euclidean(3),
        Sphere(4),
        Grassmann { n: 5, k: 2 },
        SymmetricPositiveDefinite(3),
        SkewSymmetric(3),
        Product(vec![SkewSymmetric(2), SymmetricPositiveDefinite(2), Euclidean(2)]),
    ]
}

fn least_squares_slope(ts: &[f64], rs: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .zip(rs)
        .filter(|(_, &r)| r > 1e-13)
        .map(|(&t, &r)| (t.ln(), r.ln()))
        .collect();
    if pairs.len() < 2 {
        return f64::INFINITY; // residuals at machine zero: exact
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn retract_zero_is_identity() {
    for m in all_manifolds() {
        let x = m.sample_point(1);
        let z = m.zero_tangent(&x);
        let y = m.retract(&x, &z).unwrap();
        assert_eq!(y.coords, x.coords, "{m:?}");
    }
}

#[test]
fn euclidean_retraction_is_addition() {
    let m = Euclidean(3);
    let x = m.sample_point(2);
    let v = m.sample_tangent(&x, 3).unwrap();
    let y = m.retract(&x, &v).unwrap();
    assert_eq!(y.coords, &x.coords + &v.ambient);
}

#[test]
fn retracted_points_stay_on_manifold() {
    for m in all_manifolds() {
        let x = m.sample_point(4);
        let v = m.sample_tangent(&x, 5).unwrap();
        let y = m.retract(&x, &v).unwrap();
        m.check_point(&y).unwrap_or_else(|e| panic!("{m:?}: {e}"));
    }
}

#[test]
fn grassmann_polar_retraction_is_orthonormal() {
    let m = Grassmann { n: 6, k: 3 };
    let x = m.sample_point(10);
    let v = m.sample_tangent(&x, 11).unwrap();
    let y = m.retract(&x, &v).unwrap();
    let ym = DMatrix::from_column_slice(6, 3, y.coords.as_slice());
    let defect = (ym.transpose() * &ym - DMatrix::identity(3, 3)).norm();
    assert!(defect <= 1e-12, "defect {defect}");
}

#[test]
fn projection_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for m in all_manifolds() {
        let x = m.sample_point(21);
        let a = gaussian_vector(&mut rng, m.ambient_dim());
        let p1 = m.project_tangent(&x, &a).unwrap();
        let p2 = m.project_tangent(&x, &p1.ambient).unwrap();
        assert!(
            (&p2.ambient - &p1.ambient).norm() <= 1e-12 * (1.0 + p1.ambient.norm()),
            "{m:?}"
        );
    }
}

#[test]
fn grassmann_projection_annihilates_vertical_directions() {
    let m = Grassmann { n: 5, k: 2 };
    let x = m.sample_point(30);
    let xm = DMatrix::from_column_slice(5, 2, x.coords.as_slice());
    let a = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.0, 0.7]);
    let vertical = &xm * a;
    let p = m
        .project_tangent(&x, &DVector::from_column_slice(vertical.as_slice()))
        .unwrap();
    assert!(p.ambient.norm() <= 1e-12);
}

#[test]
fn tangent_bases_are_orthonormal_and_complete() {
    for m in all_manifolds() {
        let x = m.sample_point(40);
        let basis = m.tangent_basis(&x).unwrap();
        assert_eq!(basis.len(), m.dim(), "{m:?}");
        for (i, bi) in basis.iter().enumerate() {
            m.check_tangent(&x, bi).unwrap();
            for (j, bj) in basis.iter().enumerate() {
                let ip = m.inner(&x, bi, bj).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() <= 1e-10, "{m:?} gram[{i},{j}] = {ip}");
            }
        }
    }
}

#[test]
fn euclidean_basis_is_canonical_and_projection_is_identity() {
    let m = Euclidean(2);
    let x = m.sample_point(33);
    let basis = m.tangent_basis(&x).unwrap();
    assert_eq!(basis[0].ambient.as_slice(), &[1.0, 0.0]);
    assert_eq!(basis[1].ambient.as_slice(), &[0.0, 1.0]);
    let a = DVector::from_vec(vec![0.3, -0.7]);
    let p = m.project_tangent(&x, &a).unwrap();
    assert_eq!(p.ambient, a);
}

#[test]
fn grassmann_hessian_of_linear_cost_is_the_curvature_correction() {
    // For f with constant ambient gradient G the Hessian reduces to the
    // correction term -V sym(X^T G).
    let m = Grassmann { n: 5, k: 2 };
    let x = m.sample_point(44);
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let g = gaussian_vector(&mut rng, m.ambient_dim());
    let v = m.sample_tangent(&x, 46).unwrap();
    let zero_hess = DVector::zeros(m.ambient_dim());
    let rhess = m.ehess_to_rhess(&x, &g, &zero_hess, &v).unwrap();

    let xm = DMatrix::from_column_slice(5, 2, x.coords.as_slice());
    let gm = DMatrix::from_column_slice(5, 2, g.as_slice());
    let vm = DMatrix::from_column_slice(5, 2, v.ambient.as_slice());
    let xtg = xm.transpose() * gm;
    let correction = -vm * ((&xtg + xtg.transpose()) * 0.5);
    let expected = DVector::from_column_slice(correction.as_slice());
    assert!((&rhess.ambient - &expected).norm() <= 1e-13 * (1.0 + expected.norm()));

    // and the quadratic form matches the second directional derivative of
    // the linear cost through the polar retraction
    let quad = m.inner(&x, &rhess, &v).unwrap();
    let f = |p: &Point| g.dot(&p.coords);
    let h = 1e-4;
    let fp = f(&m.retract(&x, &v.scaled(h)).unwrap());
    let fm = f(&m.retract(&x, &v.scaled(-h)).unwrap());
    let fd = (fp - 2.0 * f(&x) + fm) / (h * h);
    assert!((fd - quad).abs() <= 1e-5 * (1.0 + quad.abs()));
}

#[test]
fn product_basis_concatenates_factor_bases() {
    let f1 = Euclidean(2);
    let f2 = Sphere(3);
    let m = Product(vec![f1.clone(), f2.clone()]);
    let x = m.sample_point(50);
    assert_eq!(m.dim(), f1.dim() + f2.dim());
    assert_eq!(m.tangent_basis(&x).unwrap().len(), m.dim());
}

#[test]
fn euclidean_inner_is_dot_product() {
    let m = Euclidean(2);
    let x = Point::new(DVector::zeros(2));
    let e1 = Tangent::new(&x, DVector::from_vec(vec![1.0, 0.0]));
    assert_eq!(m.inner(&x, &e1, &e1).unwrap(), 1.0);
}

#[test]
fn spd_inner_at_identity_is_trace_product() {
    let m = SymmetricPositiveDefinite(2);
    let x = Point::new(flat(&DMatrix::identity(2, 2)));
    let u = Tangent::new(&x, flat(&DMatrix::identity(2, 2)));
    let ip = m.inner(&x, &u, &u).unwrap();
    assert!((ip - 2.0).abs() <= 1e-14);
}

#[test]
fn inner_rejects_base_mismatch() {
    let m = Euclidean(2);
    let x = m.sample_point(1);
    let y = m.sample_point(2);
    let u = m.sample_tangent(&x, 3).unwrap();
    let v = m.sample_tangent(&y, 4).unwrap();
    assert!(matches!(
        m.inner(&x, &u, &v),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn gradient_conversion_matches_finite_differences() {
    for m in all_manifolds() {
        let x = m.sample_point(60);
        let f = Poly::new(m.ambient_dim(), 61);
        let g = m.egrad_to_rgrad(&x, &f.egrad(&x.coords)).unwrap();
        for tseed in 0..3u64 {
            let v = m.sample_tangent(&x, 62 + tseed).unwrap();
            let ip = m.inner(&x, &g, &v).unwrap();
            let h = 1e-5;
            let fp = f.value(&m.retract(&x, &v.scaled(h)).unwrap().coords);
            let fm = f.value(&m.retract(&x, &v.scaled(-h)).unwrap().coords);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - ip).abs() <= 1e-5 * (1.0 + ip.abs().max(fd.abs())),
                "{m:?}: fd {fd} vs inner {ip}"
            );
        }
    }
}

#[test]
fn hessian_conversion_is_self_adjoint() {
    for m in all_manifolds() {
        let x = m.sample_point(70);
        let f = Poly::new(m.ambient_dim(), 71);
        let egrad = f.egrad(&x.coords);
        let u = m.sample_tangent(&x, 72).unwrap();
        let v = m.sample_tangent(&x, 73).unwrap();
        let hu = m
            .ehess_to_rhess(&x, &egrad, &f.ehess_apply(&x.coords, &u.ambient), &u)
            .unwrap();
        let hv = m
            .ehess_to_rhess(&x, &egrad, &f.ehess_apply(&x.coords, &v.ambient), &v)
            .unwrap();
        let a = m.inner(&x, &hu, &v).unwrap();
        let b = m.inner(&x, &u, &hv).unwrap();
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{m:?}: {a} vs {b}");
    }
}

#[test]
fn second_order_taylor_residual_has_cubic_order() {
    for m in all_manifolds() {
        let x = m.sample_point(80);
        let f = Poly::new(m.ambient_dim(), 81);
        let v = m.sample_tangent(&x, 82).unwrap();
        let egrad = f.egrad(&x.coords);
        let g = m.egrad_to_rgrad(&x, &egrad).unwrap();
        let hv = m
            .ehess_to_rhess(&x, &egrad, &f.ehess_apply(&x.coords, &v.ambient), &v)
            .unwrap();
        let slope_ip = m.inner(&x, &g, &v).unwrap();
        let quad = m.inner(&x, &hv, &v).unwrap();
        let f0 = f.value(&x.coords);
        let mut ts = Vec::new();
        let mut rs = Vec::new();
        for j in 0..6 {
            let t = 1e-2 / f64::powi(2.0, j);
            let ft = f.value(&m.retract(&x, &v.scaled(t)).unwrap().coords);
            ts.push(t);
            rs.push((ft - f0 - t * slope_ip - 0.5 * t * t * quad).abs());
        }
        let slope = least_squares_slope(&ts, &rs);
        assert!(slope >= 2.9, "{m:?}: Taylor slope {slope}");
    }
}

#[test]
fn retraction_agrees_with_ambient_step_to_first_order() {
    for m in all_manifolds() {
        if matches!(m, Euclidean(_) | SkewSymmetric(_)) {
            continue; // retraction is exactly additive
        }
        let x = m.sample_point(90);
        let v = m.sample_tangent(&x, 91).unwrap();
        let mut ts = Vec::new();
        let mut rs = Vec::new();
        for j in 0..6 {
            let t = 1e-2 / f64::powi(2.0, j);
            let y = m.retract(&x, &v.scaled(t)).unwrap();
            ts.push(t);
            rs.push((&y.coords - (&x.coords + &v.ambient * t)).norm());
        }
        let slope = least_squares_slope(&ts, &rs);
        assert!(slope >= 1.9, "{m:?}: first-order slope {slope}");
    }
}

#[test]
fn product_operations_decompose_componentwise() {
    let f1 = SkewSymmetric(2);
    let f2 = SymmetricPositiveDefinite(2);
    let m = Product(vec![f1.clone(), f2.clone()]);
    let x = m.sample_point(100);
    let u = m.sample_tangent(&x, 101).unwrap();
    let v = m.sample_tangent(&x, 102).unwrap();

    let ranges = m.slot_ranges();
    let mut expected_inner = 0.0;
    for (f, (lo, len)) in [f1, f2].iter().zip(&ranges) {
        let xs = Point::new(x.coords.rows(*lo, *len).into_owned());
        let us = Tangent::new(&xs, u.ambient.rows(*lo, *len).into_owned());
        let vs = Tangent::new(&xs, v.ambient.rows(*lo, *len).into_owned());
        expected_inner += f.inner(&xs, &us, &vs).unwrap();

        let ys = f.retract(&xs, &us).unwrap();
        let y = m.retract(&x, &u).unwrap();
        assert!((y.coords.rows(*lo, *len) - &ys.coords).norm() <= 1e-14);
    }
    let got = m.inner(&x, &u, &v).unwrap();
    assert!((got - expected_inner).abs() <= 1e-12 * (1.0 + got.abs()));
}

#[test]
fn samples_are_deterministic_and_valid() {
    for m in all_manifolds() {
        let a = m.sample_point(7);
        let b = m.sample_point(7);
        assert_eq!(a.coords, b.coords, "{m:?}");
        m.check_point(&a).unwrap();
        let ta = m.sample_tangent(&a, 8).unwrap();
        let tb = m.sample_tangent(&a, 8).unwrap();
        assert_eq!(ta.ambient, tb.ambient);
        m.check_tangent(&a, &ta).unwrap();
    }
}

#[test]
fn spd_samples_are_positive_definite() {
    let m = SymmetricPositiveDefinite(4);
    for seed in 0..5 {
        let x = m.sample_point(seed);
        let xm = DMatrix::from_column_slice(4, 4, x.coords.as_slice());
        let eig = linalg::sym_eig(&xm).unwrap();
        assert!(eig.values[0] > 0.0);
    }
}

#[test]
fn grassmann_samples_are_orthonormal() {
    let m = Grassmann { n: 7, k: 3 };
    let x = m.sample_point(3);
    let xm = DMatrix::from_column_slice(7, 3, x.coords.as_slice());
    assert!((xm.transpose() * &xm - DMatrix::identity(3, 3)).norm() <= 1e-12);
}

#[test]
fn membership_defect_flags_indefinite_spd_slot() {
    let m = SymmetricPositiveDefinite(2);
    let x = Point::new(flat(&DMatrix::from_diagonal(&DVector::from_vec(vec![
        1.0, -0.5,
    ]))));
    assert!(m.membership_defect(&x).is_infinite());
    assert!(m.check_point(&x).is_err());
}

#[test]
fn scales_follow_the_documented_defaults() {
    assert_eq!(Euclidean(4).scale(), 1.0);
    assert_eq!(Sphere(3).scale(), PI);
    assert!((Grassmann { n: 5, k: 3 }.scale() - PI * 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(SymmetricPositiveDefinite(5).scale(), 1.0);
    let p = Product(vec![SkewSymmetric(5), SymmetricPositiveDefinite(5)]);
    assert!((p.scale() - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn validate_rejects_degenerate_parameters() {
    assert!(Euclidean(0).validate().is_err());
    assert!(Sphere(1).validate().is_err());
    assert!(Grassmann { n: 3, k: 3 }.validate().is_err());
    assert!(Product(vec![]).validate().is_err());
    assert!(Product(vec![Euclidean(2), Sphere(3)]).validate().is_ok());
}
