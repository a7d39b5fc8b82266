use std::f64::consts::PI;
use std::sync::Arc;

use lambda_surf::diagnostics::{open_hemisphere_certificate, theorem2_region_test, HalfEquator, DEFAULT_TOL};
use lambda_surf::flow::{alpha, curve_geometry, CurveState, Point, VolumeMeasure};
use lambda_surf::geometry::{
    induced_metric, inverse_metric, lambda_residual, mean_curvature, min_metric_eigenvalue, unit_normal, GradHess,
};
use lambda_surf::operator::{apply_operator, OperatorContext};
use lambda_surf::{CanonicalSurface, GridDomain, Orientation, ScalarField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vector(dim: usize, range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, dim)
}

fn unit_vectors(count: std::ops::Range<usize>) -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec(vector(3, 1.0), count).prop_filter_map("degenerate direction", |raw| {
        raw.into_iter()
            .map(|v| {
                let v = DVector::from_vec(v);
                (v.norm() > 1e-3).then(|| v.normalize())
            })
            .collect()
    })
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![Just(Orientation::Inward), Just(Orientation::Outward)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_and_inverse_are_inverse(p in (1usize..6).prop_flat_map(|n| vector(n, 3.0))) {
        let g = DVector::from_vec(p);
        let prod = induced_metric(&g) * inverse_metric(&g);
        let err = (prod - DMatrix::identity(g.len(), g.len())).amax();
        prop_assert!(err <= 1e-12 * (1.0 + g.norm_squared()));
        prop_assert!((unit_normal(&g).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_metric_eigenvalue_is_one(p in (2usize..6).prop_flat_map(|n| vector(n, 3.0))) {
        prop_assert!((min_metric_eigenvalue(&DVector::from_vec(p)) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn canonical_surfaces_satisfy_their_equation(
        n in 1usize..5,
        r in 0.1f64..5.0,
        o in orientation(),
        k_frac in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let mut surfaces = vec![CanonicalSurface::sphere(n, r, o)];
        if n >= 2 {
            let k = 1 + ((n - 2) as f64 * k_frac).round() as usize;
            surfaces.push(CanonicalSurface::cylinder(n, k, r, o));
        }
        for s in surfaces {
            let flip = s.flipped();
            prop_assert_eq!(flip.canonical_lambda(), -s.canonical_lambda());
            for x in [&s, &flip] {
                let samples = x.sample_surface(50, seed).unwrap();
                for smp in samples {
                    let res = smp.support + smp.mean_curvature - x.canonical_lambda();
                    prop_assert!(res.abs() <= 1e-12 * (1.0 + r), "{res:e}");
                }
            }
        }
    }

    #[test]
    fn graph_lambda_residual_is_invariant_under_vertical_symmetry(
        p in vector(2, 2.0),
        q in vector(3, 2.0),
        x in vector(2, 2.0),
        f in -2.0f64..2.0,
        lambda in -2.0f64..2.0,
    ) {
        // reflecting the graph through the horizontal plane flips N, so the
        // residual at -λ is the negated residual
        let grad = DVector::from_vec(p);
        let hess = DMatrix::from_row_slice(2, 2, &[q[0], q[1], q[1], q[2]]);
        let gh = GradHess::new(grad.clone(), hess.clone()).unwrap();
        let neg = GradHess::new(-grad, -hess).unwrap();
        let x = DVector::from_vec(x);
        let a = lambda_residual(&x, f, &gh, lambda);
        let b = lambda_residual(&x, -f, &neg, -lambda);
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((mean_curvature(&gh) + mean_curvature(&neg)).abs() <= 1e-12);
    }

    #[test]
    fn operator_is_linear(
        c in vector(4, 1.0),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        lambda in -1.0f64..1.0,
    ) {
        let d = Arc::new(GridDomain::ball(2, 1.0, 0.125).unwrap());
        let f = ScalarField::from_fn(d.clone(), |x| c[0] * x[0] * x[1] + c[1] * (x[0] + c[2]).sin() + c[3] * x[1]).unwrap();
        let u = ScalarField::from_fn(d.clone(), |x| (x[0] - x[1]).cos()).unwrap();
        let v = ScalarField::from_fn(d.clone(), |x| x[0] * x[0] + 0.5 * x[1]).unwrap();
        let w = ScalarField::from_fn(d.clone(), |x| a * (x[0] - x[1]).cos() + b * (x[0] * x[0] + 0.5 * x[1])).unwrap();
        let ctx = OperatorContext::graph(f, lambda);
        for node in d.interior_nodes() {
            let lu = apply_operator(&ctx, &u, node).unwrap();
            let lv = apply_operator(&ctx, &v, node).unwrap();
            let lw = apply_operator(&ctx, &w, node).unwrap();
            prop_assert!((lw - a * lu - b * lv).abs() <= 1e-10 * (1.0 + lu.abs() + lv.abs()));
        }
    }

    #[test]
    fn open_certificate_is_sound(normals in unit_vectors(1..25)) {
        let c = open_hemisphere_certificate(&normals, DEFAULT_TOL).unwrap();
        let a = DVector::from_vec(c.direction.clone());
        let recheck = normals.iter().map(|n| a.dot(n)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(recheck, c.margin);
        if c.is_open() {
            prop_assert!(recheck > DEFAULT_TOL);
        }
    }

    #[test]
    fn region_test_is_monotone_in_eps(normals in unit_vectors(1..60), e1 in 0.0f64..0.5, extra in 0.0f64..0.5) {
        let emb = HalfEquator::standard(3);
        let small = theorem2_region_test(&normals, e1, emb).unwrap();
        let large = theorem2_region_test(&normals, e1 + extra, emb).unwrap();
        prop_assert!(small.witnesses.iter().all(|w| large.witnesses.contains(w)));
    }

    #[test]
    fn alpha_equals_curvature_on_regular_polygons(
        m in 16usize..200,
        rho in 0.2f64..3.0,
        cx in -1.0f64..1.0,
        cy in -1.0f64..1.0,
        phase in 0.0f64..1.0,
    ) {
        let v: Vec<Point> = (0..m)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + phase) / m as f64;
                Point::new(cx + rho * t.cos(), cy + rho * t.sin())
            })
            .collect();
        let c = CurveState::from_vertices(v, VolumeMeasure::Initial).unwrap();
        let kappa = curve_geometry(&c).unwrap().curvature;
        let a = alpha(&c).unwrap();
        prop_assert!((a - kappa[0]).abs() <= 1e-10 * kappa[0]);
    }
}
