use std::sync::Arc;

use lambda_surf::diagnostics::{
    closed_hemisphere_certificate, hemisphere_margin, measured_growth, open_hemisphere_certificate,
    theorem2_region_test, HalfEquator, HemisphereCertificate,
};
use lambda_surf::flow::{run, CurveState, FlowError, Point};
use lambda_surf::geometry::unit_normal;
use lambda_surf::operator::{
    condition_sign_change_radius, identity_cross_check, key_inequality_check, min_metric_eigenvalue_condition,
    CheckOptions, OperatorError,
};
use lambda_surf::solver::{discrete_residual, expanding_ball_experiment, solve_dirichlet, SolveReport, SolverError};
use lambda_surf::{GridDomain, NodeKind, ScalarField};
use nalgebra::DVector;
use serde::Serialize;

use crate::config::{
    AreaGrowthConfig, BernsteinConfig, CurveConfig, FlowConfig, GaussMapConfig, GraphProblem, NormalSource,
    OperatorCheckConfig, VerifyCanonicalConfig,
};
use crate::error::{invalid, CliError, Status};
use crate::output::{num, RunDir, Table};

/// Values below this are treated as equal when checking monotonicity.
const ROUNDOFF_FLOOR: f64 = 1e-10;

pub struct Context<'a> {
    pub dir: &'a RunDir,
    pub seed: u64,
    pub quiet: bool,
}

impl Context<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::Linear(_) => CliError::Numerical(e.to_string()),
        _ => invalid(e.to_string()),
    }
}

fn flow_error(e: FlowError) -> CliError {
    invalid(e.to_string())
}

fn coords_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn solve_problem(problem: &GraphProblem, domain: GridDomain) -> Result<(ScalarField, SolveReport), CliError> {
    let graph = problem.boundary.clone();
    solve_dirichlet(Arc::new(domain), move |x| graph.value(x), problem.lambda, &problem.solver.options())
        .map_err(solver_error)
}

#[derive(Serialize)]
struct SurfaceResult {
    surface: lambda_surf::CanonicalSurface,
    lambda: f64,
    mean_curvature: f64,
    max_residual: f64,
    passed: bool,
}

pub fn verify_canonical(cfg: &VerifyCanonicalConfig, ctx: &Context) -> Result<Status, CliError> {
    let mut surfaces = Vec::new();
    for s in &cfg.surfaces {
        surfaces.push(s.clone());
        if cfg.both_orientations && !matches!(s, lambda_surf::CanonicalSurface::Plane { .. }) {
            surfaces.push(s.flipped());
        }
    }
    let mut table = Table::new(["surface", "sample", "support", "mean_curvature", "residual"]);
    let mut results = Vec::new();
    for (k, s) in surfaces.iter().enumerate() {
        let lambda = s.canonical_lambda();
        let samples = s.sample_surface(cfg.count, ctx.seed).map_err(|e| invalid(e.to_string()))?;
        let mut worst = 0.0f64;
        for (i, smp) in samples.iter().enumerate() {
            let r = smp.support + smp.mean_curvature - lambda;
            worst = worst.max(r.abs());
            table.push(vec![k.to_string(), i.to_string(), num(smp.support), num(smp.mean_curvature), num(r)]);
        }
        ctx.say(format!("surface {k}: lambda {lambda:.6}, max residual {worst:.3e}"));
        results.push(SurfaceResult {
            surface: s.clone(),
            lambda,
            mean_curvature: s.mean_curvature(),
            max_residual: worst,
            passed: worst <= cfg.tol,
        });
    }
    let status = if results.iter().all(|r| r.passed) { Status::Ok } else { Status::InvariantViolated };
    ctx.dir.write_csv("samples.csv", &table)?;
    ctx.dir.write_report("verify-canonical", ctx.seed, status, cfg, &results)?;
    Ok(status)
}

#[derive(Serialize)]
struct SolveResult {
    report: SolveReport,
    nodes: usize,
    interior_nodes: usize,
    /// Max deviation from the boundary graph when `lambda` is that graph's own λ.
    max_error_vs_boundary_graph: Option<f64>,
}

pub fn solve_graph(cfg: &GraphProblem, ctx: &Context) -> Result<Status, CliError> {
    let domain = cfg.validate()?;
    let dim = domain.dim();
    let (field, report) = solve_problem(cfg, domain)?;
    let domain = field.domain();
    let residual = discrete_residual(&field, cfg.lambda);
    let mut table = Table::new(coords_header(dim).into_iter().chain(["interior".into(), "f".into(), "residual".into()]));
    let exact = (cfg.boundary.lambda() - cfg.lambda).abs() <= 1e-12;
    let mut max_err = 0.0f64;
    for node in 0..domain.len() {
        let kind = domain.kind(node);
        if kind == NodeKind::Outside {
            continue;
        }
        let x = domain.coords(node);
        if exact && kind == NodeKind::Interior {
            max_err = max_err.max((field.values()[node] - cfg.boundary.value(&x)).abs());
        }
        let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
        row.push(u8::from(kind == NodeKind::Interior).to_string());
        row.push(num(field.values()[node]));
        row.push(num(residual.values()[node]));
        table.push(row);
    }
    let status = if report.converged { Status::Ok } else { Status::NotConverged };
    ctx.say(format!(
        "solve-graph: converged {}, iterations {}, residual {:.3e}",
        report.converged, report.iterations, report.final_residual_norm
    ));
    let result = SolveResult {
        nodes: domain.len(),
        interior_nodes: domain.interior_nodes().len(),
        max_error_vs_boundary_graph: exact.then_some(max_err),
        report,
    };
    ctx.dir.write_csv("field.csv", &table)?;
    ctx.dir.write_report("solve-graph", ctx.seed, status, cfg, &result)?;
    Ok(status)
}

#[derive(Serialize)]
struct BernsteinResult {
    rows: Vec<lambda_surf::solver::BernsteinRow>,
    all_converged: bool,
    sup_hessian_non_increasing: bool,
}

pub fn bernstein(cfg: &BernsteinConfig, ctx: &Context) -> Result<Status, CliError> {
    cfg.validate()?;
    let rows = expanding_ball_experiment(cfg.lambda, &cfg.radii, &cfg.slope, cfg.spacing, &cfg.solver.options())
        .map_err(solver_error)?;
    let mut table = Table::new(["radius", "sup_hessian", "sup_gradient_deviation", "converged", "iterations", "residual"]);
    for r in &rows {
        table.push(vec![
            num(r.radius),
            num(r.sup_hessian),
            num(r.sup_gradient_deviation),
            u8::from(r.report.converged).to_string(),
            r.report.iterations.to_string(),
            num(r.report.final_residual_norm),
        ]);
        ctx.say(format!(
            "R = {}: sup|D2f| {:.3e}, sup|Df - slope| {:.3e}, converged {}",
            r.radius, r.sup_hessian, r.sup_gradient_deviation, r.report.converged
        ));
    }
    let all_converged = rows.iter().all(|r| r.report.converged);
    let monotone = rows.windows(2).all(|w| w[1].sup_hessian <= w[0].sup_hessian.max(ROUNDOFF_FLOOR));
    let status = match (all_converged, monotone) {
        (false, _) => Status::NotConverged,
        (true, false) => Status::InvariantViolated,
        (true, true) => Status::Ok,
    };
    let result = BernsteinResult { rows, all_converged, sup_hessian_non_increasing: monotone };
    ctx.dir.write_csv("rows.csv", &table)?;
    ctx.dir.write_report("bernstein", ctx.seed, status, cfg, &result)?;
    Ok(status)
}

#[derive(Serialize)]
struct FlowResult {
    diagnostics: lambda_surf::flow::FlowDiagnostics,
    stability_bound: f64,
    drift_within_tol: bool,
}

pub fn flow(cfg: &FlowConfig, ctx: &Context) -> Result<Status, CliError> {
    cfg.validate()?;
    let initial = match &cfg.curve {
        CurveConfig::Circle { radius, vertices } => CurveState::circle(*radius, *vertices, cfg.measure),
        CurveConfig::Ellipse { a, b, vertices } => CurveState::ellipse(*a, *b, *vertices, cfg.measure),
        CurveConfig::Polygon { points } => {
            CurveState::from_vertices(points.iter().map(|p| Point::new(p[0], p[1])).collect(), cfg.measure)
        }
    }
    .map_err(flow_error)?;
    let bound = initial.stability_bound();
    if cfg.dt > bound {
        return Err(invalid(format!("dt {:e} exceeds the initial stability bound {bound:e}", cfg.dt)));
    }
    let diag = run(&initial, cfg.t_end, cfg.dt, cfg.record_every).map_err(flow_error)?;
    let mut table = Table::new(["t", "alpha", "volume", "volume_drift", "area", "max_speed"]);
    for r in &diag.rows {
        let drift = (r.volume - diag.initial_volume).abs() / diag.initial_volume.abs();
        table.push(vec![num(r.t), num(r.alpha), num(r.volume), num(drift), num(r.area), num(r.max_speed)]);
    }
    let mut curve = Table::new(["x", "y"]);
    if let Some(state) = &diag.final_state {
        for v in state.vertices() {
            curve.push(vec![num(v.x), num(v.y)]);
        }
    }
    let within = diag.max_relative_drift <= cfg.drift_tol;
    let status = if diag.halted.is_none() && within { Status::Ok } else { Status::InvariantViolated };
    match &diag.halted {
        Some(reason) => ctx.say(format!("flow halted after {} steps: {reason}", diag.steps_taken)),
        None => ctx.say(format!("flow: {} steps, max relative volume drift {:.3e}", diag.steps_taken, diag.max_relative_drift)),
    }
    let result = FlowResult { diagnostics: diag, stability_bound: bound, drift_within_tol: within };
    ctx.dir.write_csv("flow.csv", &table)?;
    ctx.dir.write_csv("final_curve.csv", &curve)?;
    ctx.dir.write_report("flow", ctx.seed, status, cfg, &result)?;
    Ok(status)
}

#[derive(Serialize)]
struct OperatorResult {
    solve: SolveReport,
    inequality: Option<lambda_surf::operator::InequalityReport>,
    identity: Option<lambda_surf::operator::IdentityReport>,
    condition: Vec<lambda_surf::operator::ConditionRow>,
    sign_change_radius: f64,
    refusal: Option<String>,
}

pub fn operator_check(cfg: &OperatorCheckConfig, ctx: &Context) -> Result<Status, CliError> {
    let domain = cfg.validate()?;
    let dim = domain.dim();
    let lambda = cfg.problem.lambda;
    let (field, solve) = solve_problem(&cfg.problem, domain)?;
    let condition = min_metric_eigenvalue_condition(&field, lambda, &cfg.radii);
    let mut result = OperatorResult {
        solve,
        inequality: None,
        identity: None,
        condition,
        sign_change_radius: condition_sign_change_radius(lambda, dim),
        refusal: None,
    };
    let mut table = Table::new(coords_header(dim).into_iter().chain(["slack".into(), "explicit_slack".into()]));
    let status = if !result.solve.converged {
        ctx.say("operator-check: solve did not converge");
        Status::NotConverged
    } else {
        let opts = CheckOptions { residual_tol: cfg.residual_tol };
        let checked = key_inequality_check(&field, lambda, &opts)
            .and_then(|ineq| identity_cross_check(&field, lambda, &opts).map(|id| (ineq, id)));
        match checked {
            Ok((ineq, id)) => {
                for (k, &node) in ineq.nodes.iter().enumerate() {
                    let mut row: Vec<String> = field.domain().coords(node).iter().map(|v| num(*v)).collect();
                    row.push(num(ineq.slack_field[k]));
                    row.push(num(ineq.explicit_field[k]));
                    table.push(row);
                }
                ctx.say(format!(
                    "operator-check: min slack {:.3e}, eps_h {:.3e}, identity discrepancy {:.3e}",
                    ineq.min_slack, ineq.epsilon_h, id.max_discrepancy
                ));
                let passed = ineq.passed;
                result.inequality = Some(ineq);
                result.identity = Some(id);
                if passed { Status::Ok } else { Status::InvariantViolated }
            }
            Err(e @ OperatorError::NotASolution { .. }) => {
                ctx.say(format!("operator-check: {e}"));
                result.refusal = Some(e.to_string());
                Status::InvariantViolated
            }
            Err(e) => return Err(invalid(e.to_string())),
        }
    };
    ctx.dir.write_csv("slack.csv", &table)?;
    ctx.dir.write_report("operator-check", ctx.seed, status, cfg, &result)?;
    Ok(status)
}

#[derive(Serialize)]
struct GaussMapResult {
    count: usize,
    open: HemisphereCertificate,
    closed: HemisphereCertificate,
    region: lambda_surf::diagnostics::RegionReport,
    recheck_margin: f64,
}

fn collect_normals(cfg: &GaussMapConfig, seed: u64) -> Result<Vec<DVector<f64>>, CliError> {
    Ok(match &cfg.source {
        NormalSource::Surface { surface, count } => surface
            .sample_surface(*count, seed)
            .map_err(|e| invalid(e.to_string()))?
            .into_iter()
            .map(|s| s.normal)
            .collect(),
        NormalSource::Graph { graph, domain } => {
            let domain = domain.build()?;
            let mut out = Vec::new();
            for node in 0..domain.len() {
                if domain.kind(node) == NodeKind::Outside {
                    continue;
                }
                let x = domain.coords(node);
                if graph.contains(&x) {
                    let gh = graph.grad_hess(&x).map_err(|e| invalid(e.to_string()))?;
                    out.push(unit_normal(&gh.grad));
                }
            }
            if out.is_empty() {
                return Err(invalid("graph is undefined on every node of the domain"));
            }
            out
        }
        NormalSource::List { normals } => normals.iter().map(|v| DVector::from_column_slice(v)).collect(),
    })
}

pub fn gauss_map(cfg: &GaussMapConfig, ctx: &Context) -> Result<Status, CliError> {
    cfg.validate()?;
    let normals = collect_normals(cfg, ctx.seed)?;
    let d = normals[0].len();
    let mut resolved = cfg.clone();
    let embedding = *resolved.embedding.get_or_insert(HalfEquator::standard(d));
    let diag = |e: lambda_surf::diagnostics::DiagnosticsError| invalid(e.to_string());
    let open = open_hemisphere_certificate(&normals, cfg.tol).map_err(diag)?;
    let closed = closed_hemisphere_certificate(&normals, cfg.tol).map_err(diag)?;
    let region = theorem2_region_test(&normals, cfg.eps, embedding).map_err(diag)?;
    let recheck = hemisphere_margin(&DVector::from_column_slice(&open.direction), &normals);
    // soundness: the reported margin must hold for every input normal
    let sound = recheck >= open.margin && (!open.is_open() || recheck > cfg.tol);
    let mut table = Table::new(["index".to_string()].into_iter().chain((1..=d).map(|i| format!("n{i}"))));
    for &i in &region.witnesses {
        table.push(std::iter::once(i.to_string()).chain(normals[i].iter().map(|v| num(*v))).collect());
    }
    ctx.say(format!(
        "gauss-map: {} normals, verdict {:?}, margin {:.3e}, half-equator violations {}",
        normals.len(),
        closed.verdict,
        closed.margin,
        region.violations
    ));
    let status = if sound { Status::Ok } else { Status::InvariantViolated };
    let result = GaussMapResult { count: normals.len(), open, closed, region, recheck_margin: recheck };
    ctx.dir.write_csv("witnesses.csv", &table)?;
    ctx.dir.write_report("gauss-map", ctx.seed, status, &resolved, &result)?;
    Ok(status)
}

#[derive(Serialize)]
struct GrowthResult {
    report: lambda_surf::diagnostics::GrowthReport,
    within_bound: bool,
}

pub fn area_growth(cfg: &AreaGrowthConfig, ctx: &Context) -> Result<Status, CliError> {
    cfg.validate()?;
    let report = measured_growth(&cfg.surface, &cfg.radii).map_err(|e| invalid(e.to_string()))?;
    let mut table = Table::new(["radius", "area"]);
    for (r, a) in report.radii.iter().zip(&report.areas) {
        table.push(vec![num(*r), num(*a)]);
    }
    let within = report.fitted_exponent <= report.bound_exponent + cfg.slack;
    ctx.say(format!(
        "area-growth: fitted exponent {:.6}, bound {:.6}",
        report.fitted_exponent, report.bound_exponent
    ));
    let status = if within { Status::Ok } else { Status::InvariantViolated };
    ctx.dir.write_csv("areas.csv", &table)?;
    ctx.dir.write_report("area-growth", ctx.seed, status, cfg, &GrowthResult { report, within_bound: within })?;
    Ok(status)
}
