mod common;

use std::sync::Arc;

use common::{order, Hemisphere};
use lambda_surf::operator::{
    apply_operator, explicit_slack, identity_cross_check, key_inequality_check, min_metric_eigenvalue_condition,
    CheckOptions, OperatorContext, OperatorError,
};
use lambda_surf::solver::{solve_dirichlet, SolveOptions};
use lambda_surf::{GridDomain, ScalarField};
use nalgebra::{DMatrix, DVector, Rotation2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ball(n: usize, r: f64, h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::ball(n, r, h).unwrap())
}

#[test]
fn flat_operator_has_hermite_eigenfunctions() {
    let d = Arc::new(GridDomain::boxed(vec![-2.0, -2.0], vec![2.0, 2.0], 0.125).unwrap());
    let ctx = OperatorContext::graph(ScalarField::zeros(d.clone()), 0.0);
    for (k, psi) in [(1.0, ScalarField::from_fn(d.clone(), |x| x[0]).unwrap()), (2.0, ScalarField::from_fn(d.clone(), |x| x[0] * x[0] - 1.0).unwrap())] {
        for node in d.interior_nodes() {
            let l = apply_operator(&ctx, &psi, node).unwrap();
            assert!((l + k * psi.values()[node]).abs() < 1e-10, "k={k}");
        }
    }
}

#[test]
fn explicit_slack_matches_rotated_coordinate_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p: DVector<f64> = DVector::from_vec(vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let (a, b, c): (f64, f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let q = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        // rotate so that the gradient lies along the first axis
        let rot = Rotation2::new(-p[1].atan2(p[0]));
        let r = DMatrix::from_row_slice(2, 2, rot.matrix().as_slice()).transpose();
        let qr = &r * &q * r.transpose();
        let f1 = p.norm();
        let fi = [f1, 0.0];
        let mut oracle = 0.0;
        for pp in 0..2 {
            for i in 0..2 {
                oracle += 2.0 * qr[(pp, i)].powi(2) / ((1.0 + fi[i] * fi[i]) * (1.0 + fi[pp] * fi[pp]) * (1.0 + f1 * f1));
            }
        }
        let got = explicit_slack(&p, &q);
        assert!((got - oracle).abs() <= 1e-12 * (1.0 + oracle), "{got} vs {oracle}");
    }
}

#[test]
fn affine_graphs_have_zero_slack() {
    for (n, slope, offset) in [(1usize, vec![0.5], 0.0), (2, vec![0.5, -0.25], 0.0), (2, vec![0.75, 0.125], 0.5)] {
        let d = ball(n, 1.0, 1.0 / 16.0);
        let f = ScalarField::from_fn(d, |x| offset + x.iter().zip(&slope).map(|(a, b)| a * b).sum::<f64>()).unwrap();
        let w = (1.0 + slope.iter().map(|s| s * s).sum::<f64>()).sqrt();
        let lambda = offset / w;
        let rep = key_inequality_check(&f, lambda, &CheckOptions::default()).unwrap();
        assert_eq!(rep.min_slack, 0.0);
        assert!(rep.slack_field.iter().all(|&s| s == 0.0));
        assert!(rep.passed);
        let id = identity_cross_check(&f, lambda, &CheckOptions::default()).unwrap();
        assert_eq!(id.max_discrepancy, 0.0);
    }
}

#[test]
fn hemisphere_slack_tracks_closed_form() {
    let hemi = Hemisphere { r: 1.0 };
    let mut worst = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let d = ball(1, 0.5, h);
        let f = ScalarField::from_fn(d.clone(), |x| hemi.value(x)).unwrap();
        let rep = key_inequality_check(&f, hemi.lambda(1), &CheckOptions::default()).unwrap();
        assert!(rep.passed && rep.min_slack >= -rep.epsilon_h, "{rep:?}");
        // 2 f''² / (1 + f'²)³ with exact derivatives
        let mut err = 0.0f64;
        for (k, &node) in rep.nodes.iter().enumerate() {
            let x = d.coords(node);
            let p = hemi.grad(&x)[0];
            let q = hemi.hess(&x)[(0, 0)];
            let exact = 2.0 * q * q / (1.0 + p * p).powi(3);
            err = err.max((rep.slack_field[k] - exact).abs());
        }
        worst.push(err);
    }
    assert!(order(worst[0], worst[1]) >= 0.9, "{worst:?}");
}

#[test]
fn identity_discrepancy_converges() {
    let hemi = Hemisphere { r: 1.0 };
    for (n, hs) in [(1usize, [1.0 / 32.0, 1.0 / 64.0]), (2, [1.0 / 16.0, 1.0 / 32.0])] {
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let f = ScalarField::from_fn(ball(n, 0.5, h), |x| hemi.value(x)).unwrap();
                identity_cross_check(&f, hemi.lambda(n), &CheckOptions::default()).unwrap().max_discrepancy
            })
            .collect();
        assert!(order(errs[0], errs[1]) >= 0.9, "n={n}: {errs:?}");
    }
}

#[test]
fn solved_graphs_satisfy_the_inequality() {
    for (n, radius, h) in [(1usize, 2.0, 1.0 / 32.0), (2, 1.0, 1.0 / 16.0)] {
        let d = ball(n, radius, h);
        let (f, rep) = solve_dirichlet(d, |_| 0.0, 0.3, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        let ineq = key_inequality_check(&f, 0.3, &CheckOptions::default()).unwrap();
        assert!(ineq.passed, "{ineq:?}");
        assert!(ineq.max_explicit_discrepancy <= ineq.epsilon_h, "{ineq:?}");
    }
}

#[test]
fn non_solutions_are_refused() {
    let f = ScalarField::from_fn(ball(2, 1.0, 1.0 / 16.0), |x| x[0] * x[0] + 0.5 * x[1]).unwrap();
    assert!(matches!(key_inequality_check(&f, 0.0, &CheckOptions::default()), Err(OperatorError::NotASolution { .. })));
    let strict = CheckOptions { residual_tol: Some(1e-12) };
    let hemi = Hemisphere { r: 1.0 };
    let g = ScalarField::from_fn(ball(1, 0.5, 1.0 / 32.0), |x| hemi.value(x)).unwrap();
    assert!(matches!(identity_cross_check(&g, hemi.lambda(1), &strict), Err(OperatorError::NotASolution { .. })));
}

#[test]
fn graph_metric_eigenvalue_is_one_in_two_dimensions() {
    let d = ball(2, 1.0, 1.0 / 16.0);
    let f = ScalarField::from_fn(d, |x| (3.0 * x[0]).sin() * x[1] + 2.0 * x[1] * x[1]).unwrap();
    let rows = min_metric_eigenvalue_condition(&f, 0.7, &[1.0, 2.0]);
    for r in &rows {
        assert!((r.sampled_min_eigenvalue - 1.0).abs() <= 1e-12);
    }
    assert!((rows[1].margin - (4.0 - 1.4 - 2.0)).abs() < 1e-12);
}
