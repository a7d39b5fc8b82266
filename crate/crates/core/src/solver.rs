//! Finite-difference solver for the graphic λ-equation
//!
//! ```text
//! sum_ij g^ij f_ij = -f + x . Df + λ sqrt(1 + |Df|^2),   g^ij = δ_ij - f_i f_j / (1 + |Df|^2)
//! ```
//!
//! on ball/box grids with Dirichlet data. The discrete residual is
//! `R(f) = Δf - (Df^T D²f Df)/W² + f - x . Df - λ W` with `W² = 1 + |Df|²`,
//! evaluated with second-order central differences. Newton steps use the
//! exact Jacobian of that stencil and a backtracking line search on `½|R|²`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridDomain, GridError, ScalarField};
use crate::sparse::{gmres, BandedLu, CsrMatrix, LinearSolveError};

pub const ARMIJO_C: f64 = 1e-4;
pub const BACKTRACK_FACTOR: f64 = 0.5;
pub const MAX_BACKTRACKS: usize = 30;
/// Inexact-Newton forcing term for the Krylov path.
pub const KRYLOV_FORCING: f64 = 1e-2;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("radii must be positive and strictly increasing")]
    BadRadii,
    #[error("slope has {got} entries, expected 1 or 2")]
    BadSlope { got: usize },
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinearSolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearStrategy {
    /// Banded LU for `n = 1`, GMRES for `n = 2`.
    #[default]
    Auto,
    Direct,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear: LinearStrategy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, linear: LinearStrategy::Auto }
    }
}

/// Outcome of a Dirichlet solve. `iterations` counts linear solves: the
/// initial extension solve plus one per Newton step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub newton_decrements: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
}

struct Local {
    f: f64,
    p: [f64; 2],
    q: [[f64; 2]; 2],
}

fn local_derivatives(domain: &GridDomain, values: &[f64], node: usize) -> Local {
    let n = domain.dim();
    let h = domain.spacing();
    let f = values[node];
    let mut p = [0.0; 2];
    let mut q = [[0.0; 2]; 2];
    let mut off = [0i64; 2];
    for i in 0..n {
        off[i] = 1;
        let fp = values[domain.offset(node, &off[..n]).unwrap()];
        off[i] = -1;
        let fm = values[domain.offset(node, &off[..n]).unwrap()];
        off[i] = 0;
        p[i] = (fp - fm) / (2.0 * h);
        q[i][i] = (fp - 2.0 * f + fm) / (h * h);
    }
    if n == 2 {
        let corner = |a: i64, b: i64| values[domain.offset(node, &[a, b]).unwrap()];
        let m = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * h * h);
        q[0][1] = m;
        q[1][0] = m;
    }
    Local { f, p, q }
}

fn node_residual(domain: &GridDomain, values: &[f64], node: usize, lambda: f64) -> f64 {
    let n = domain.dim();
    let Local { f, p, q } = local_derivatives(domain, values, node);
    let mut x = [0.0; 2];
    domain.coords_into(node, &mut x[..n]);
    let mut lap = 0.0;
    let mut pqp = 0.0;
    let mut p2 = 0.0;
    let mut xp = 0.0;
    for i in 0..n {
        lap += q[i][i];
        p2 += p[i] * p[i];
        xp += x[i] * p[i];
        for j in 0..n {
            pqp += p[i] * q[i][j] * p[j];
        }
    }
    let w2 = 1.0 + p2;
    lap - pqp / w2 + f - xp - lambda * w2.sqrt()
}

fn interior_residuals(field: &ScalarField, lambda: f64, nodes: &[usize]) -> Vec<f64> {
    let domain = field.domain();
    let values = field.values();
    nodes.par_iter().map(|&node| node_residual(domain, values, node, lambda)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual of the graphic λ-equation at every interior node (0 elsewhere).
pub fn discrete_residual(field: &ScalarField, lambda: f64) -> ScalarField {
    let nodes = field.domain().interior_nodes();
    let res = interior_residuals(field, lambda, &nodes);
    let mut out = ScalarField::zeros(field.domain_arc().clone());
    for (node, r) in nodes.into_iter().zip(res) {
        out.values_mut()[node] = r;
    }
    out
}

/// Max-norm of the discrete residual over interior nodes.
pub fn residual_norm(field: &ScalarField, lambda: f64) -> f64 {
    max_abs(&interior_residuals(field, lambda, &field.domain().interior_nodes()))
}

/// Jacobian of the interior residual with respect to the interior values.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub matrix: CsrMatrix,
    /// Node id of each unknown, in matrix order.
    pub unknowns: Vec<usize>,
}

impl LinearizedOperator {
    /// Applies the operator to a perturbation given per unknown.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }
}

fn unknown_index(domain: &GridDomain, unknowns: &[usize]) -> Vec<Option<usize>> {
    let mut index = vec![None; domain.len()];
    for (k, &node) in unknowns.iter().enumerate() {
        index[node] = Some(k);
    }
    index
}

/// Exact derivative of [`discrete_residual`] with respect to interior values.
pub fn linearize(field: &ScalarField, lambda: f64) -> LinearizedOperator {
    let domain = field.domain();
    let values = field.values();
    let n = domain.dim();
    let h = domain.spacing();
    let unknowns = domain.interior_nodes();
    let index = unknown_index(domain, &unknowns);

    let rows: Vec<Vec<(usize, usize, f64)>> = unknowns
        .par_iter()
        .enumerate()
        .map(|(row, &node)| {
            let Local { p, q, .. } = local_derivatives(domain, values, node);
            let mut x = [0.0; 2];
            domain.coords_into(node, &mut x[..n]);
            let p2: f64 = p[..n].iter().map(|v| v * v).sum();
            let w2 = 1.0 + p2;
            let w = w2.sqrt();
            let mut qp = [0.0; 2];
            let mut pqp = 0.0;
            for i in 0..n {
                for j in 0..n {
                    qp[i] += q[i][j] * p[j];
                }
                pqp += p[i] * qp[i];
            }
            let mut c = [[0.0; 2]; 2];
            let mut dp = [0.0; 2];
            for i in 0..n {
                for j in 0..n {
                    c[i][j] = if i == j { 1.0 } else { 0.0 } - p[i] * p[j] / w2;
                }
                dp[i] = -2.0 * qp[i] / w2 + 2.0 * pqp * p[i] / (w2 * w2) - x[i] - lambda * p[i] / w;
            }

            let mut entries = Vec::with_capacity(9);
            let mut push = |nb: usize, v: f64| {
                if let Some(col) = index[nb] {
                    entries.push((row, col, v));
                }
            };
            let mut centre = 1.0;
            let mut off = [0i64; 2];
            for i in 0..n {
                centre -= 2.0 * c[i][i] / (h * h);
                off[i] = 1;
                push(domain.offset(node, &off[..n]).unwrap(), c[i][i] / (h * h) + dp[i] / (2.0 * h));
                off[i] = -1;
                push(domain.offset(node, &off[..n]).unwrap(), c[i][i] / (h * h) - dp[i] / (2.0 * h));
                off[i] = 0;
            }
            if n == 2 {
                let coef = 2.0 * c[0][1] / (4.0 * h * h);
                for (a, b) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                    push(domain.offset(node, &[a, b]).unwrap(), coef * (a * b) as f64);
                }
            }
            push(node, centre);
            entries
        })
        .collect();

    let triplets = rows.into_iter().flatten().collect();
    LinearizedOperator { matrix: CsrMatrix::from_triplets(unknowns.len(), triplets), unknowns }
}

/// Residual of the `λ = 0`, `Df = 0` linearization, `Δv + v - x . Dv`.
fn linear_model_residual(field: &ScalarField, nodes: &[usize]) -> Vec<f64> {
    let domain = field.domain();
    let n = domain.dim();
    nodes
        .par_iter()
        .map(|&node| {
            let Local { f, p, q } = local_derivatives(domain, field.values(), node);
            let mut x = [0.0; 2];
            domain.coords_into(node, &mut x[..n]);
            (0..n).map(|i| q[i][i] - x[i] * p[i]).sum::<f64>() + f
        })
        .collect()
}

fn solve_linear(
    a: &CsrMatrix,
    rhs: &[f64],
    dim: usize,
    strategy: LinearStrategy,
    rtol: f64,
) -> Result<Vec<f64>, LinearSolveError> {
    let direct = |a: &CsrMatrix| -> Result<Vec<f64>, LinearSolveError> {
        let x = BandedLu::factor(a)?.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(LinearSolveError::NonFinite)
        }
    };
    let krylov = strategy == LinearStrategy::Krylov || (strategy == LinearStrategy::Auto && dim >= 2);
    if !krylov {
        return direct(a);
    }
    let mut x = vec![0.0; rhs.len()];
    match gmres(a, rhs, &mut x, rtol, GMRES_RESTART, GMRES_MAX_ITER) {
        Ok(_) => Ok(x),
        // restarted GMRES can stall on the nearly singular odd modes of large
        // balls; the banded factorisation is the fallback
        Err(LinearSolveError::GmresStalled(_)) => direct(a),
        Err(e) => Err(e),
    }
}

/// Solves the graphic λ-equation with Dirichlet data `boundary` on the
/// boundary layer of `domain`. Non-convergence is not an error: the best
/// iterate is returned with `converged = false`.
pub fn solve_dirichlet(
    domain: Arc<GridDomain>,
    boundary: impl Fn(&[f64]) -> f64,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport), SolverError> {
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(SolverError::BadTolerance(opts.tol));
    }
    let dim = domain.dim();
    let unknowns = domain.interior_nodes();
    let mut field = ScalarField::zeros(domain.clone());
    let mut x = vec![0.0; dim];
    for node in domain.boundary_nodes() {
        domain.coords_into(node, &mut x);
        field.values_mut()[node] = boundary(&x);
    }
    ScalarField::new(domain.clone(), field.values().to_vec())?;

    // extension of the boundary data by the linear model (exact in one solve)
    let r_lin = linear_model_residual(&field, &unknowns);
    let j0 = linearize(&ScalarField::zeros(domain.clone()), 0.0);
    let rhs: Vec<f64> = r_lin.iter().map(|v| -v).collect();
    let delta = solve_linear(&j0.matrix, &rhs, dim, opts.linear, 1e-12)?;
    for (k, &node) in unknowns.iter().enumerate() {
        field.values_mut()[node] += delta[k];
    }

    let mut report = SolveReport {
        iterations: 1,
        final_residual_norm: f64::INFINITY,
        newton_decrements: Vec::new(),
        step_lengths: Vec::new(),
        converged: false,
        tolerance: opts.tol,
    };
    let mut res = interior_residuals(&field, lambda, &unknowns);
    let mut norm = max_abs(&res);
    let mut best = (norm, field.clone());

    for _ in 0..opts.max_iter {
        if norm <= opts.tol {
            break;
        }
        let jac = linearize(&field, lambda);
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let rtol = KRYLOV_FORCING;
        let mut step = solve_linear(&jac.matrix, &rhs, dim, opts.linear, rtol);
        let mut shift = 1e-8;
        while step.is_err() && shift <= 1e-1 {
            let damped = jac.matrix.with_scaled_diagonal(shift);
            step = solve_linear(&damped, &rhs, dim, LinearStrategy::Direct, rtol);
            shift *= 100.0;
        }
        let Ok(step) = step else { break };
        report.iterations += 1;
        report.newton_decrements.push(max_abs(&step));

        let phi0 = 0.5 * res.iter().map(|r| r * r).sum::<f64>();
        let jd = jac.apply(&step);
        let slope: f64 = res.iter().zip(&jd).map(|(r, d)| r * d).sum();
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let mut trial = field.clone();
            for (k, &node) in unknowns.iter().enumerate() {
                trial.values_mut()[node] += t * step[k];
            }
            let trial_res = interior_residuals(&trial, lambda, &unknowns);
            let phi = 0.5 * trial_res.iter().map(|r| r * r).sum::<f64>();
            if phi.is_finite() && phi <= phi0 + ARMIJO_C * t * slope {
                accepted = Some((trial, trial_res));
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        let Some((trial, trial_res)) = accepted else { break };
        report.step_lengths.push(t);
        field = trial;
        res = trial_res;
        norm = max_abs(&res);
        if norm < best.0 {
            best = (norm, field.clone());
        }
    }

    report.final_residual_norm = best.0;
    report.converged = best.0 <= opts.tol;
    Ok((best.1, report))
}

/// One radius of the expanding-ball experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinRow {
    pub radius: f64,
    /// Max Frobenius norm of `D²f` over interior nodes with `|x| <= R/2`.
    pub sup_hessian: f64,
    /// Max of `|Df - slope|` over the same nodes.
    pub sup_gradient_deviation: f64,
    pub report: SolveReport,
}

/// Solves with affine data `slope . x` on balls of growing radius and
/// reports how far the interior solution is from a hyperplane.
pub fn expanding_ball_experiment(
    lambda: f64,
    radii: &[f64],
    slope: &[f64],
    h: f64,
    opts: &SolveOptions,
) -> Result<Vec<BernsteinRow>, SolverError> {
    if !(1..=2).contains(&slope.len()) {
        return Err(SolverError::BadSlope { got: slope.len() });
    }
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolverError::BadRadii);
    }
    let n = slope.len();
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let domain = Arc::new(GridDomain::ball(n, radius, h)?);
        let (field, report) = solve_dirichlet(
            domain.clone(),
            |x| x.iter().zip(slope).map(|(a, b)| a * b).sum(),
            lambda,
            opts,
        )?;
        let mut sup_hessian = 0.0f64;
        let mut sup_dev = 0.0f64;
        for node in domain.interior_nodes() {
            let x = domain.coords(node);
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.5 * radius + 1e-12 {
                continue;
            }
            let gh = field.gradhess(node)?;
            sup_hessian = sup_hessian.max(gh.hess.norm());
            let dev = gh.grad.iter().zip(slope).map(|(g, s)| (g - s).powi(2)).sum::<f64>().sqrt();
            sup_dev = sup_dev.max(dev);
        }
        rows.push(BernsteinRow { radius, sup_hessian, sup_gradient_deviation: sup_dev, report });
    }
    Ok(rows)
}
