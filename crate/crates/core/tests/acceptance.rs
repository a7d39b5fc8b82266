//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantities; the process exits nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{grid_hemisphere_oracle, order, Hemisphere};
use lambda_surf::diagnostics::{
    closed_hemisphere_certificate, measured_growth, open_hemisphere_certificate, Verdict, DEFAULT_TOL,
};
use lambda_surf::flow::{run, CurveState, VolumeMeasure};
use lambda_surf::geometry::min_metric_eigenvalue;
use lambda_surf::operator::{
    condition_margin, condition_sign_change_radius, identity_cross_check, key_inequality_check, CheckOptions,
};
use lambda_surf::solver::{
    discrete_residual, expanding_ball_experiment, linearize, residual_norm, solve_dirichlet, SolveOptions,
};
use lambda_surf::{CanonicalSurface, GridDomain, Orientation, ScalarField};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn ball(n: usize, r: f64, h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::ball(n, r, h).unwrap())
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn canonical_lambdas() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut exact = true;
    let mut surfaces = vec![CanonicalSurface::horizontal_plane(2, 0.0), CanonicalSurface::plane(vec![0.6, 0.0, 0.8], 0.0)];
    for o in [Orientation::Inward, Orientation::Outward] {
        for (n, r) in [(1usize, 1.0), (2, 2f64.sqrt()), (3, 0.5), (5, 3.0)] {
            surfaces.push(CanonicalSurface::sphere(n, r, o));
            exact &= CanonicalSurface::sphere(n, r, o).canonical_lambda() == o.sign() * (n as f64 / r - r);
        }
        for (n, k, r) in [(2usize, 1usize, 1.0), (3, 2, 0.7), (4, 1, 2.5)] {
            surfaces.push(CanonicalSurface::cylinder(n, k, r, o));
            exact &= CanonicalSurface::cylinder(n, k, r, o).canonical_lambda() == o.sign() * (k as f64 / r - r);
        }
    }
    for s in &surfaces {
        if !matches!(s, CanonicalSurface::Plane { .. }) {
            exact &= s.flipped().canonical_lambda() == -s.canonical_lambda();
        } else {
            exact &= s.canonical_lambda() == 0.0;
        }
        worst = worst.max(s.verify_canonical(1000).unwrap());
    }
    let t = start.elapsed();
    check(exact && worst <= 1e-12 && within(t, 1.0), format!("max residual {worst:.2e}, closed forms exact {exact}, {t:.2?}"))
}

fn residual_order() -> Outcome {
    let start = Instant::now();
    let hemi = Hemisphere { r: 1.0 };
    let mut errs = Vec::new();
    let mut max_nodes = 0;
    for h in [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0] {
        let d = ball(1, 0.5, h);
        max_nodes = max_nodes.max(d.len());
        let f = ScalarField::from_fn(d, |x| hemi.value(x)).unwrap();
        // residual of the graph equation divided by W is the λ-residual
        errs.push(residual_norm(&f, hemi.lambda(1)));
    }
    let (p1, p2) = (order(errs[0], errs[1]), order(errs[1], errs[2]));
    let t = start.elapsed();
    check(
        p1 >= 1.9 && p2 >= 1.9 && max_nodes <= 4096 && within(t, 10.0),
        format!("errors {}, orders {p1:.3} {p2:.3}, max nodes {max_nodes}, {t:.2?}", sci(&errs)),
    )
}

fn solver_correctness() -> Outcome {
    let hemi = Hemisphere { r: 1.0 };
    let mut errs = Vec::new();
    let mut converged = true;
    for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let d = ball(1, 0.5, h);
        let (f, rep) = solve_dirichlet(d.clone(), |x| hemi.value(x), hemi.lambda(1), &SolveOptions::default()).unwrap();
        converged &= rep.converged;
        errs.push(d.interior_nodes().iter().map(|&k| (f.values()[k] - hemi.value(&d.coords(k))).abs()).fold(0.0, f64::max));
    }
    let (p1, p2) = (order(errs[0], errs[1]), order(errs[1], errs[2]));

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for probe in 0..20 {
        let n = 1 + probe % 2;
        let d = ball(n, 1.0, if n == 1 { 1.0 / 32.0 } else { 1.0 / 8.0 });
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let field = ScalarField::from_fn(d.clone(), |x| {
            let y = if n == 2 { x[1] } else { 0.0 };
            c[0] * (1.1 * x[0] + c[1]).sin() + c[2] * x[0] * y + c[3] * y * y + c[4]
        })
        .unwrap();
        let lambda = rng.random_range(-1.0..1.0);
        let op = linearize(&field, lambda);
        let v: Vec<f64> = op.unknowns.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let jv = op.apply(&v);
        let eps = 1e-5;
        let shifted = |s: f64| {
            let mut f = field.clone();
            for (k, &node) in op.unknowns.iter().enumerate() {
                f.values_mut()[node] += s * v[k];
            }
            let r = discrete_residual(&f, lambda);
            op.unknowns.iter().map(|&node| r.values()[node]).collect::<Vec<f64>>()
        };
        let (rp, rm) = (shifted(eps), shifted(-eps));
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = jv.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    check(
        converged && p1 >= 1.9 && p2 >= 1.9 && worst <= 1e-6,
        format!("recovery errors {}, orders {p1:.3} {p2:.3}, jacobian rel err {worst:.2e} over 20 probes", sci(&errs)),
    )
}

fn flow_conservation() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let shapes: [(&str, fn(usize) -> CurveState); 2] = [
        ("circle r=2.5", |m| CurveState::circle(2.5, m, VolumeMeasure::Initial).unwrap()),
        ("ellipse 3.0x2.5", |m| CurveState::ellipse(3.0, 2.5, m, VolumeMeasure::Initial).unwrap()),
    ];
    for (name, make) in shapes {
        let coarse = run(&make(512), 0.5, 1e-4, 1).unwrap();
        let fine = run(&make(1024), 0.5, 5e-5, 2).unwrap();
        let halted = coarse.halted.is_some() || fine.halted.is_some();
        let (d1, d2) = (coarse.max_relative_drift, fine.max_relative_drift);
        let decreases = d1 >= 2.0 * d2;
        ok &= !halted && d1 <= 1e-3 && decreases;
        lines.push(format!("{name}: drift {d1:.2e} -> {d2:.2e} (halved: {decreases})"));
        if name.starts_with("circle") {
            let speed = coarse.rows.iter().map(|r| r.max_speed).fold(0.0, f64::max);
            ok &= speed <= 1e-6;
            lines.push(format!("circle max speed {speed:.2e}"));
        }
    }
    let t = start.elapsed();
    ok &= within(t, 60.0);
    check(ok, format!("{}, {t:.2?}", lines.join("; ")))
}

fn operator_inequality() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let opts = CheckOptions::default();
    for (n, slope, offset) in [(1usize, vec![0.5], 0.0), (2, vec![0.75, 0.125], 0.5)] {
        let d = ball(n, 1.0, 1.0 / 16.0);
        let f = ScalarField::from_fn(d, |x| offset + x.iter().zip(&slope).map(|(a, b)| a * b).sum::<f64>()).unwrap();
        let lambda = offset / (1.0 + slope.iter().map(|s| s * s).sum::<f64>()).sqrt();
        let rep = key_inequality_check(&f, lambda, &opts).unwrap();
        let zero = rep.slack_field.iter().all(|&s| s == 0.0);
        ok &= rep.passed && zero;
        lines.push(format!("affine n={n}: slack identically zero {zero}"));
    }

    let hemi = Hemisphere { r: 1.0 };
    let mut slack_err = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let d = ball(1, 0.5, h);
        let f = ScalarField::from_fn(d.clone(), |x| hemi.value(x)).unwrap();
        let rep = key_inequality_check(&f, hemi.lambda(1), &opts).unwrap();
        ok &= rep.passed;
        let err = rep
            .nodes
            .iter()
            .zip(&rep.slack_field)
            .map(|(&node, s)| {
                let x = d.coords(node);
                let p = hemi.grad(&x)[0];
                let q = hemi.hess(&x)[(0, 0)];
                (s - 2.0 * q * q / (1.0 + p * p).powi(3)).abs()
            })
            .fold(0.0, f64::max);
        slack_err.push(err);
        lines.push(format!("hemisphere h={h}: min slack {:.2e}, eps_h {:.2e}", rep.min_slack, rep.epsilon_h));
    }
    let p = order(slack_err[0], slack_err[1]);
    ok &= p >= 0.9;
    lines.push(format!("slack vs exact quadratic form {} (order {p:.2})", sci(&slack_err)));

    for (n, radius, h) in [(1usize, 2.0, 1.0 / 32.0), (2, 1.0, 1.0 / 16.0)] {
        let (f, rep) = solve_dirichlet(ball(n, radius, h), |_| 0.0, 0.3, &SolveOptions::default()).unwrap();
        let ineq = key_inequality_check(&f, 0.3, &opts).unwrap();
        let id = identity_cross_check(&f, 0.3, &opts).unwrap();
        ok &= rep.converged && ineq.passed && ineq.max_explicit_discrepancy <= ineq.epsilon_h;
        lines.push(format!(
            "solved lambda=0.3 n={n} R={radius}: min slack {:.2e}, eps_h {:.2e}, explicit discrepancy {:.2e}, identity {:.2e}",
            ineq.min_slack, ineq.epsilon_h, ineq.max_explicit_discrepancy, id.max_discrepancy
        ));
    }
    check(ok, lines.join("; "))
}

fn eigenvalue_hypothesis() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut oracle_worst) = (0.0f64, 0.0f64);
    for i in 0..10_000 {
        let n = 2 + i % 4;
        let p = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let mu = min_metric_eigenvalue(&p);
        worst = worst.max((mu - 1.0).abs());
        let g = DMatrix::identity(n, n) + &p * p.transpose();
        let eig = g.symmetric_eigen().eigenvalues.min();
        oracle_worst = oracle_worst.max((eig - 1.0).abs());
    }
    let mut root_err = 0.0f64;
    for lambda in [-2.0, -0.3, 0.0, 0.5, 1.7] {
        for n in 1..=5 {
            // bisection on the margin as an independent root
            let (mut lo, mut hi) = (0.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid * mid - f64::abs(lambda) * mid - n as f64 > 0.0 { hi = mid } else { lo = mid }
            }
            let r = condition_sign_change_radius(lambda, n);
            root_err = root_err.max((r - 0.5 * (lo + hi)).abs());
            let below = condition_margin(lambda, n, r - 1e-6) < 0.0;
            let above = condition_margin(lambda, n, r + 1e-6) > 0.0;
            if !(below && above) {
                root_err = f64::INFINITY;
            }
        }
    }
    check(
        worst <= 1e-12 && oracle_worst <= 1e-12 && root_err <= 1e-9,
        format!("eigenvalue error {worst:.2e} (eigensolver oracle {oracle_worst:.2e}) over 1e4 gradients n=2..5, root error {root_err:.2e}"),
    )
}

fn growth_exponents() -> Outcome {
    let start = Instant::now();
    let cases = [
        ("plane n=2", CanonicalSurface::horizontal_plane(2, 0.0), vec![1.0, 2.0, 4.0, 8.0], 2.0),
        ("plane n=3", CanonicalSurface::horizontal_plane(3, 0.0), vec![1.0, 2.0, 4.0, 8.0], 3.0),
        ("cylinder k=1 n=2", CanonicalSurface::cylinder(2, 1, 1.0, Orientation::Inward), vec![1.5, 2.0, 4.0, 8.0, 16.0, 32.0], 1.0),
        ("cylinder k=1 n=3", CanonicalSurface::cylinder(3, 1, 1.0, Orientation::Inward), vec![1.5, 2.0, 4.0, 8.0, 16.0, 32.0], 2.0),
        ("sphere n=2", CanonicalSurface::sphere(2, 1.0, Orientation::Inward), vec![2.0, 4.0, 8.0], 0.0),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, s, radii, expected) in cases {
        let rep = measured_growth(&s, &radii).unwrap();
        ok &= (rep.fitted_exponent - expected).abs() <= 0.05 && rep.fitted_exponent <= rep.bound_exponent + 0.05;
        lines.push(format!("{name}: fitted {:.4}, bound {:.4}", rep.fitted_exponent, rep.bound_exponent));
    }
    let t = start.elapsed();
    ok &= within(t, 5.0);
    check(ok, format!("{}, {t:.2?}", lines.join("; ")))
}

fn hemisphere_certificates() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let up = vec![DVector::from_vec(vec![0.0, 0.0, 1.0]); 10];
    let c = open_hemisphere_certificate(&up, DEFAULT_TOL).unwrap();
    let axis_ok = (DVector::from_vec(c.direction.clone()) - &up[0]).norm() < 1e-9;
    ok &= c.verdict == Verdict::Open && axis_ok;
    lines.push(format!("graph normals: {:?} margin {:.3}", c.verdict, c.margin));

    let circle: Vec<DVector<f64>> = (0..360)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / 360.0;
            DVector::from_vec(vec![t.cos(), t.sin(), 0.0])
        })
        .collect();
    let c = closed_hemisphere_certificate(&circle, DEFAULT_TOL).unwrap();
    ok &= c.verdict == Verdict::ClosedOnly;
    lines.push(format!("great circle: {:?} margin {:.1e}", c.verdict, c.margin));

    let pair = vec![DVector::from_vec(vec![1.0, 0.0, 0.0]), DVector::from_vec(vec![-1.0, 0.0, 0.0])];
    let c = closed_hemisphere_certificate(&pair, DEFAULT_TOL).unwrap();
    ok &= c.verdict == Verdict::Neither;
    lines.push(format!("antipodal pair: {:?} margin {:.1e} (expected Neither)", c.verdict, c.margin));

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let count = rng.random_range(2..40);
        let centre = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let spread = rng.random_range(0.1..3.0);
        let normals: Vec<DVector<f64>> = (0..count)
            .map(|_| (&centre + DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)) * spread).normalize())
            .collect();
        let c = open_hemisphere_certificate(&normals, DEFAULT_TOL).unwrap();
        worst = worst.max((c.margin - grid_hemisphere_oracle(&normals)).abs());
    }
    ok &= worst <= 1e-2;
    lines.push(format!("optimizer vs grid oracle on 100 instances: max gap {worst:.2e}"));
    check(ok, lines.join("; "))
}

fn bernstein_evidence() -> Outcome {
    let h = 1.0 / 32.0;
    let radii = [1.0, 2.0, 4.0];
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut lines = Vec::new();
    for (lambda, slope) in [(0.0, 0.0), (0.0, 1.0), (0.5, 0.0)] {
        let rows = expanding_ball_experiment(lambda, &radii, &[slope], h, &opts).unwrap();
        let converged = rows.iter().all(|r| r.report.converged);
        let sups: Vec<f64> = rows.iter().map(|r| r.sup_hessian).collect();
        // values at roundoff level are treated as equal
        let monotone = sups.windows(2).all(|w| w[1] <= w[0].max(1e-10));
        ok &= converged && monotone;
        if lambda == 0.0 && slope == 0.0 {
            ok &= sups.iter().all(|&s| s <= 1e-10);
        }
        let flags: Vec<bool> = rows.iter().map(|r| r.report.converged).collect();
        lines.push(format!("lambda={lambda} slope={slope}: sup|D2f| {}, converged {flags:?}", sci(&sups)));
    }
    check(ok, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 canonical lambda values", canonical_lambdas),
        ("2 graphic equation residual order", residual_order),
        ("3 solver recovery and jacobian", solver_correctness),
        ("4 flow volume conservation", flow_conservation),
        ("5 operator inequality", operator_inequality),
        ("6 eigenvalue hypothesis", eigenvalue_hypothesis),
        ("7 growth exponents", growth_exponents),
        ("8 hemisphere certificates", hemisphere_certificates),
        ("9 bernstein evidence", bernstein_evidence),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let out = f();
        println!("{} criterion {name}: {}", if out.passed { "PASS" } else { "FAIL" }, out.detail);
        failed += usize::from(!out.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
