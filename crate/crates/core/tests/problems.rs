mod common;

use common::rng;
use mngn2::linalg;
use mngn2::problems::{self, ProblemConfig, ProblemKind, VectorSpec};
use mngn2::solver::Problem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn build(cfg: ProblemConfig) -> mngn2::TestProblem {
    cfg.build().expect("valid configuration")
}

#[test]
fn known_solutions_solve_the_system() {
    for cfg in common::builtin_configs() {
        let tp = build(cfg);
        if let Some(x) = &tp.known_solution {
            let r = tp.problem.residual_norm(x);
            assert!(r <= 1e-8, "{}: |F(x)| = {r:e}", tp.name);
        }
    }
}

#[test]
fn stated_optimal_norms() {
    let norm = |cfg: ProblemConfig| build(cfg).known_norm.unwrap();

    assert!((norm(ProblemConfig::new(ProblemKind::Paraboloid)) - 3.681558).abs() <= 1e-4);

    // Chain with c = 2e: x = (xi, 2 (m-1 times), xi (n-m times)).
    let (m, n) = (8usize, 10usize);
    let xi = 2.0 - ((n - m + 1) as f64).powf(-0.5);
    let expected = ((n - m + 1) as f64 * xi * xi + 4.0 * (m - 1) as f64).sqrt();
    assert!((xi - 1.4226).abs() < 1e-4);
    assert!((norm(ProblemConfig::new(ProblemKind::Chain)) - expected).abs() <= 1e-12);
    assert!((expected - 5.8371).abs() <= 1e-4);

    let first2 = VectorSpec::FirstOnly(2.0);
    for kind in [
        ProblemKind::EllipsoidProduct,
        ProblemKind::SpherePlanes,
        ProblemKind::Chain,
    ] {
        let tp = build(ProblemConfig::new(kind).with_c(first2.clone()));
        let mut e1 = DVector::zeros(10);
        e1[0] = 1.0;
        assert_eq!(tp.known_solution.as_ref(), Some(&e1), "{kind}");
    }

    // Unit sphere around 2e: 2 sqrt(n) - 1.
    let ep = norm(ProblemConfig::new(ProblemKind::EllipsoidProduct));
    assert!((ep - (2.0 * 10f64.sqrt() - 1.0)).abs() <= 1e-12);
    assert!((ep - 5.3246).abs() <= 1e-4);
}

#[test]
fn paraboloid_solution_is_a_kkt_point() {
    let tp = build(ProblemConfig::new(ProblemKind::Paraboloid));
    let x = tp.known_solution.unwrap();
    let expected = [0.859754, 1.849178, 3.065164];
    for (v, e) in x.iter().zip(expected) {
        assert!((v - e).abs() < 1e-6, "{v} vs {e}");
    }
    // x must be parallel to the constraint gradient.
    let g = tp.problem.jacobian(&x).row(0).transpose();
    let cos = x.dot(&g).abs() / (x.norm() * g.norm());
    assert!((cos - 1.0).abs() < 1e-12);
}

#[test]
fn paraboloid_optimum_beats_a_dense_scan() {
    // Independent oracle: scan (x1, x2), with x3 fixed by the constraint.
    let mut best = f64::INFINITY;
    let steps = 400;
    for i in 0..=steps {
        for j in 0..=steps {
            let x1 = 0.7 + 0.3 * i as f64 / steps as f64;
            let x2 = 1.7 + 0.3 * j as f64 / steps as f64;
            let x3 = (x1 - 1.0f64).powi(2) + 2.0 * (x2 - 2.0f64).powi(2) + 3.0;
            best = best.min((x1 * x1 + x2 * x2 + x3 * x3).sqrt());
        }
    }
    let known = build(ProblemConfig::new(ProblemKind::Paraboloid)).known_norm.unwrap();
    assert!(known <= best + 1e-12);
    assert!(best - known < 1e-5);
}

#[test]
fn robot_reachable_configuration() {
    let tp = build(ProblemConfig::new(ProblemKind::Robot));
    let d1 = ((3.0f64 - 2.0).powi(2) + 9.0).sqrt();
    let d4 = ((3.0f64 - 2.0 - 10.0).powi(2) + 9.0).sqrt();
    let x = DVector::from_vec(vec![0.0, d1, 0.0, d4]);
    assert!(tp.problem.residual_norm(&x) <= 1e-12);

    let mut g = rng(3);
    for _ in 0..20 {
        let x = DVector::from_fn(4, |_, _| g.random_range(-5.0..5.0));
        let j = tp.problem.jacobian(&x);
        for (r, c) in [(0, 2), (0, 3), (1, 0), (1, 1)] {
            assert_eq!(j[(r, c)], 0.0);
        }
    }
    let x = DVector::from_vec(vec![0.3, 3.0, 0.1, 1.0]);
    assert_eq!(tp.problem.jacobian(&x)[(0, 1)], -6.0);
}

#[test]
fn circle_solution_is_nearest_point() {
    let tp = build(ProblemConfig::new(ProblemKind::Circle2d));
    let x = tp.known_solution.unwrap();
    // radius 1/0.75 around (2, 2)
    let expected = 2.0 * 2f64.sqrt() - 1.0 / 0.75;
    assert!((x.norm() - expected).abs() < 1e-12);
    assert!((x[0] - x[1]).abs() < 1e-15);
}

/// Points with `S(x) = 0` on the unit sphere around `c`.
fn sphere_points(c: &DVector<f64>, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut g = rng(seed);
    (0..count)
        .map(|_| {
            let u = DVector::from_fn(c.len(), |_, _| g.random_range(-1.0..1.0));
            c + u.normalize()
        })
        .collect()
}

#[test]
fn jacobian_has_rank_one_on_the_ellipsoid() {
    for kind in [ProblemKind::EllipsoidProduct, ProblemKind::SpherePlanes] {
        for c in [VectorSpec::Constant(2.0), VectorSpec::FirstOnly(2.0)] {
            let tp = build(ProblemConfig::new(kind).with_c(c.clone()));
            let cv = c.build(10).unwrap();
            for x in sphere_points(&cv, 10, 5) {
                let sigma = linalg::singular_values(&tp.problem.jacobian(&x)).unwrap();
                let above = sigma.iter().filter(|&&s| s > 1e-8 * sigma[0]).count();
                assert_eq!(above, 1, "{kind} at S = 0: {sigma:?}");
            }
        }
    }
}

#[test]
fn square_sphere_planes_spectrum() {
    let n = 6;
    let tp = build(ProblemConfig::sized(ProblemKind::SpherePlanes, n, n));
    let c = DVector::from_element(n, 2.0);
    let mut g = rng(9);
    for _ in 0..10 {
        let x = DVector::from_fn(n, |_, _| g.random_range(-3.0..3.0));
        let s = (&x - &c).norm_squared() - 1.0;
        // y = x - c, z = (x - c) / a^2 with a = e
        let y = &x - &c;
        let top = s + 2.0 * y.dot(&y);
        let mut eig: Vec<f64> = tp
            .problem
            .jacobian(&x)
            .complex_eigenvalues()
            .iter()
            .map(|z| {
                assert!(z.im.abs() <= 1e-8 * (1.0 + top.abs()));
                z.re
            })
            .collect();
        eig.sort_by(f64::total_cmp);
        let mut expected = vec![s; n - 1];
        expected.push(top);
        expected.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{eig:?} vs {expected:?}");
        }
    }
}

#[test]
fn sphere_planes_solution_follows_dimension_rule() {
    for n in 2..30usize {
        for m in 1..=n {
            let tp = build(ProblemConfig::sized(ProblemKind::SpherePlanes, m, n));
            let x = tp.known_solution.unwrap();
            let planes = (m as f64) < n as f64 - (n as f64).sqrt() + 0.25;
            if planes {
                assert!(x.rows(0, m).iter().all(|&v| v == 2.0));
                assert!(x.rows(m, n - m).iter().all(|&v| v == 0.0));
            } else {
                let v = 2.0 - (n as f64).sqrt() / n as f64;
                assert!(x.iter().all(|&xi| (xi - v).abs() < 1e-12), "m={m} n={n}");
            }
        }
    }
}

#[test]
fn analytic_jacobians_agree_with_finite_differences() {
    for cfg in common::builtin_configs() {
        let tp = build(cfg);
        for o in problems::check_problem(&tp, 20, 21) {
            assert!(o.passed, "{} {}: {}", tp.name, o.name, o.detail);
        }
    }
}

#[test]
fn problems_without_jacobian_fall_back_to_differences() {
    let p = Problem::new(2, 3, |x: &DVector<f64>| {
        DVector::from_vec(vec![x[0] * x[1] - x[2], x[0].sin() + x[2] * x[2]])
    });
    let x = DVector::from_vec(vec![0.4, -1.2, 2.0]);
    let exact = DMatrix::from_row_slice(2, 3, &[-1.2, 0.4, -1.0, 0.4f64.cos(), 0.0, 4.0]);
    assert!(!p.has_analytic_jacobian());
    assert!((p.jacobian(&x) - exact).amax() < 1e-9);
}

#[test]
fn sized_problems_reject_bad_shapes() {
    assert!(ProblemConfig::sized(ProblemKind::Chain, 11, 10).build().is_err());
    assert!(ProblemConfig::sized(ProblemKind::Chain, 1, 10).build().is_err());
    assert!(ProblemConfig::new(ProblemKind::SpherePlanes)
        .with_a(VectorSpec::List(vec![1.0; 3]))
        .build()
        .is_err());
    assert!(ProblemConfig::new(ProblemKind::EllipsoidProduct)
        .with_a(VectorSpec::Constant(0.0))
        .build()
        .is_err());
}
