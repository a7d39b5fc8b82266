//! The drift operator
//!
//! ```text
//! L ψ = sum a^ij ψ_ij - <x, Dψ> - λ <Df, Dψ> / sqrt(1 + |Df|^2)
//! ```
//!
//! and numerical checks of the inequality `L ψ >= ½ sum g^ij ψ_i ψ_j` for
//! `ψ = log(1 + |Df|^2)` on solutions of the graphic λ-equation, with
//! `a_ij = g_ij`. On solutions the slack of that inequality has the closed
//! form `(2 / W²) tr(g⁻¹ D²f g⁻¹ D²f)`, which is what [`explicit_slack`]
//! evaluates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{area_factor, induced_metric, inverse_metric, log_det_metric};
use crate::grid::{GridError, ScalarField};
use crate::solver::residual_norm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("fields live on different grids")]
    DomainMismatch,
    #[error("coefficient list has {got} entries, grid has {expected} nodes")]
    CoefficientCount { got: usize, expected: usize },
    #[error("coefficient matrix at node {node} is not symmetric positive definite")]
    NotSpd { node: usize },
    #[error("field does not solve the λ-equation: residual {residual:e} exceeds {tolerance:e}")]
    NotASolution { residual: f64, tolerance: f64 },
    #[error("no grid node is deep enough for the required stencils")]
    NoNodes,
}

/// Principal coefficients `(a_ij)` of the operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// Induced metric `g_ij = δ_ij + f_i f_j` of the drift field.
    GraphMetric,
    Identity,
    /// Explicit SPD matrices per node, stored as their inverses `a^ij`.
    PerNode(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone)]
pub struct OperatorContext {
    coeff: Coefficients,
    field: ScalarField,
    lambda: f64,
}

impl OperatorContext {
    pub fn graph(field: ScalarField, lambda: f64) -> Self {
        Self { coeff: Coefficients::GraphMetric, field, lambda }
    }

    pub fn identity(field: ScalarField, lambda: f64) -> Self {
        Self { coeff: Coefficients::Identity, field, lambda }
    }

    /// General coefficients `a_ij`, one matrix per grid node; each must be SPD.
    pub fn with_coefficients(field: ScalarField, lambda: f64, a: Vec<DMatrix<f64>>) -> Result<Self, OperatorError> {
        let n = field.domain().dim();
        if a.len() != field.domain().len() {
            return Err(OperatorError::CoefficientCount { got: a.len(), expected: field.domain().len() });
        }
        let mut inv = Vec::with_capacity(a.len());
        for (node, m) in a.into_iter().enumerate() {
            let symmetric = m.nrows() == n && m.ncols() == n && (&m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
            let chol = if symmetric { m.cholesky() } else { None };
            match chol {
                Some(c) => inv.push(c.inverse()),
                None => return Err(OperatorError::NotSpd { node }),
            }
        }
        Ok(Self { coeff: Coefficients::PerNode(inv), field, lambda })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeff
    }

    fn inverse_coefficients(&self, node: usize, grad_f: &DVector<f64>) -> DMatrix<f64> {
        let n = grad_f.len();
        match &self.coeff {
            Coefficients::GraphMetric => inverse_metric(grad_f),
            Coefficients::Identity => DMatrix::identity(n, n),
            Coefficients::PerNode(inv) => inv[node].clone(),
        }
    }

    /// Smallest eigenvalue of `(a_ij)` at a node, from a symmetric eigensolver.
    pub fn min_coefficient_eigenvalue(&self, node: usize) -> Result<f64, OperatorError> {
        let a = match &self.coeff {
            Coefficients::GraphMetric => induced_metric(&self.field.domain().gradient(self.field.values(), node)?),
            Coefficients::Identity => {
                let n = self.field.domain().dim();
                DMatrix::identity(n, n)
            }
            Coefficients::PerNode(inv) => inv[node].clone().try_inverse().ok_or(OperatorError::NotSpd { node })?,
        };
        Ok(SymmetricEigen::new(a).eigenvalues.min())
    }
}

fn same_grid(a: &ScalarField, b: &ScalarField) -> bool {
    std::sync::Arc::ptr_eq(a.domain_arc(), b.domain_arc()) || a.domain() == b.domain()
}

/// `L ψ` at an interior node with central differences for `ψ` and `f`.
pub fn apply_operator(ctx: &OperatorContext, psi: &ScalarField, node: usize) -> Result<f64, OperatorError> {
    if !same_grid(ctx.field(), psi) {
        return Err(OperatorError::DomainMismatch);
    }
    let domain = psi.domain();
    let gh = domain.gradhess(psi.values(), node)?;
    let df = domain.gradient(ctx.field.values(), node)?;
    let ainv = ctx.inverse_coefficients(node, &df);
    let x = DVector::from_vec(domain.coords(node));
    let drift = x.dot(&gh.grad) + ctx.lambda * df.dot(&gh.grad) / area_factor(&df);
    Ok(ainv.component_mul(&gh.hess).sum() - drift)
}

/// `(2 / W²) tr(g⁻¹ Q g⁻¹ Q)` for gradient `p` and Hessian `Q` of `f`.
pub fn explicit_slack(grad: &DVector<f64>, hess: &DMatrix<f64>) -> f64 {
    let ginv = inverse_metric(grad);
    let m = &ginv * hess;
    2.0 * (&m * &m).trace() / (1.0 + grad.norm_squared())
}

/// One sampled radius of the eigenvalue hypothesis
/// `μ(x)(|x|² - |λ||x|) - n > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub radius: f64,
    /// Smallest eigenvalue of the metric over the field's nodes (eigensolver).
    pub sampled_min_eigenvalue: f64,
    /// Margin with the rank-one lower bound `μ = 1`.
    pub margin: f64,
}

/// Radius at which `|x|² - |λ||x| - n` changes sign.
pub fn condition_sign_change_radius(lambda: f64, n: usize) -> f64 {
    let l = lambda.abs();
    (l + (l * l + 4.0 * n as f64).sqrt()) / 2.0
}

pub fn condition_margin(lambda: f64, n: usize, radius: f64) -> f64 {
    radius * radius - lambda.abs() * radius - n as f64
}

/// Evaluates the eigenvalue hypothesis on the given radii. `μ` is bounded
/// below by 1 for every graph metric; the eigenvalue actually seen on the
/// field is reported alongside.
pub fn min_metric_eigenvalue_condition(field: &ScalarField, lambda: f64, radii: &[f64]) -> Vec<ConditionRow> {
    let domain = field.domain();
    let nodes = domain.interior_nodes();
    let ctx = OperatorContext::graph(field.clone(), lambda);
    let mu = nodes
        .par_iter()
        .map(|&node| ctx.min_coefficient_eigenvalue(node).unwrap_or(f64::INFINITY))
        .reduce(|| f64::INFINITY, f64::min);
    let mu = if mu.is_finite() { mu } else { 1.0 };
    radii
        .iter()
        .map(|&radius| ConditionRow {
            radius,
            sampled_min_eigenvalue: mu,
            margin: condition_margin(lambda, domain.dim(), radius),
        })
        .collect()
}

/// Knobs for the inequality and identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CheckOptions {
    /// Max residual accepted as "solves the λ-equation". Defaults to
    /// `h (1 + max|D²f|)²`.
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub min_slack: f64,
    pub epsilon_h: f64,
    pub passed: bool,
    pub nodes_checked: usize,
    pub residual_norm: f64,
    pub residual_tol: f64,
    /// Max over nodes of `|slack - explicit_slack|`.
    pub max_explicit_discrepancy: f64,
    #[serde(skip)]
    pub nodes: Vec<usize>,
    #[serde(skip)]
    pub slack_field: Vec<f64>,
    #[serde(skip)]
    pub explicit_field: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    /// Largest of the three pairwise discrepancies below.
    pub max_discrepancy: f64,
    /// `L ψ` by differencing ψ vs. the chain-rule expansion with third derivatives of `f`.
    pub direct_vs_expanded: f64,
    /// `L ψ` by differencing ψ vs. the closed form valid on solutions.
    pub direct_vs_closed: f64,
    pub expanded_vs_closed: f64,
    pub nodes_checked: usize,
    pub residual_norm: f64,
}

fn max_hessian_norm(field: &ScalarField) -> Result<f64, OperatorError> {
    let domain = field.domain();
    let norms: Result<Vec<f64>, GridError> = domain
        .interior_nodes()
        .par_iter()
        .map(|&node| domain.gradhess(field.values(), node).map(|gh| gh.hess.norm()))
        .collect();
    Ok(norms?.into_iter().fold(0.0, f64::max))
}

/// Checks the solution precondition; returns `(residual, max|D²f|)`.
fn require_solution(field: &ScalarField, lambda: f64, opts: &CheckOptions) -> Result<(f64, f64), OperatorError> {
    let hmax = max_hessian_norm(field)?;
    let tol = opts.residual_tol.unwrap_or(field.spacing() * (1.0 + hmax).powi(2));
    let residual = residual_norm(field, lambda);
    if !(residual <= tol) {
        return Err(OperatorError::NotASolution { residual, tolerance: tol });
    }
    Ok((residual, hmax))
}

/// `ψ = log(1 + |Df|²)` on nodes with a full gradient stencil, 0 elsewhere.
pub fn psi_field(field: &ScalarField) -> ScalarField {
    let domain = field.domain();
    let mut psi = ScalarField::zeros(field.domain_arc().clone());
    let nodes = domain.interior_nodes();
    let vals: Vec<f64> = nodes
        .par_iter()
        .map(|&node| log_det_metric(&domain.gradient(field.values(), node).expect("interior node")))
        .collect();
    for (node, v) in nodes.into_iter().zip(vals) {
        psi.values_mut()[node] = v;
    }
    psi
}

/// Checks `L ψ >= ½ g^ij ψ_i ψ_j` with `a = g` on a solved graph. Nodes two
/// cells from the boundary are checked so every ψ stencil is complete.
pub fn key_inequality_check(field: &ScalarField, lambda: f64, opts: &CheckOptions) -> Result<InequalityReport, OperatorError> {
    let (residual, hmax) = require_solution(field, lambda, opts)?;
    let residual_tol = opts.residual_tol.unwrap_or(field.spacing() * (1.0 + hmax).powi(2));
    let domain = field.domain();
    let nodes = domain.nodes_with_depth(2);
    if nodes.is_empty() {
        return Err(OperatorError::NoNodes);
    }
    let psi = psi_field(field);
    let ctx = OperatorContext::graph(field.clone(), lambda);
    let rows: Result<Vec<(f64, f64)>, OperatorError> = nodes
        .par_iter()
        .map(|&node| {
            let lpsi = apply_operator(&ctx, &psi, node)?;
            let dpsi = domain.gradient(psi.values(), node)?;
            let gh = domain.gradhess(field.values(), node)?;
            let ginv = inverse_metric(&gh.grad);
            let quad = 0.5 * (dpsi.transpose() * &ginv * &dpsi)[(0, 0)];
            Ok((lpsi - quad, explicit_slack(&gh.grad, &gh.hess)))
        })
        .collect();
    let (slack_field, explicit_field): (Vec<f64>, Vec<f64>) = rows?.into_iter().unzip();
    let min_slack = slack_field.iter().copied().fold(f64::INFINITY, f64::min);
    let max_explicit_discrepancy =
        slack_field.iter().zip(&explicit_field).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let epsilon_h = 10.0 * field.spacing() * (1.0 + hmax).powi(2);
    Ok(InequalityReport {
        min_slack,
        epsilon_h,
        passed: min_slack >= -epsilon_h,
        nodes_checked: nodes.len(),
        residual_norm: residual,
        residual_tol,
        max_explicit_discrepancy,
        nodes,
        slack_field,
        explicit_field,
    })
}

/// Evaluates `L ψ` three ways on a solved graph and reports how far apart
/// they are: differencing the sampled ψ, expanding ψ_ij by the chain rule
/// with third differences of `f`, and the second-order closed form
/// `½ g^ij ψ_i ψ_j + explicit_slack` that holds on solutions.
pub fn identity_cross_check(field: &ScalarField, lambda: f64, opts: &CheckOptions) -> Result<IdentityReport, OperatorError> {
    let (residual, _) = require_solution(field, lambda, opts)?;
    let domain = field.domain();
    let n = domain.dim();
    let nodes = domain.nodes_with_depth(2);
    if nodes.is_empty() {
        return Err(OperatorError::NoNodes);
    }
    let psi = psi_field(field);
    let ctx = OperatorContext::graph(field.clone(), lambda);
    let rows: Result<Vec<[f64; 3]>, OperatorError> = nodes
        .par_iter()
        .map(|&node| {
            let direct = apply_operator(&ctx, &psi, node)?;

            let gh = domain.gradhess(field.values(), node)?;
            let third = domain.third_derivatives(field.values(), node)?;
            let p = &gh.grad;
            let q = &gh.hess;
            let w2 = 1.0 + p.norm_squared();
            let ginv = inverse_metric(p);
            let dpsi = q * p * (2.0 / w2);
            // ψ_ij = 2 (f_ki f_kj + f_k f_kij) / W² - ψ_i ψ_j
            let mut psi_hess = q * q * (2.0 / w2) - &dpsi * dpsi.transpose();
            for k in 0..n {
                psi_hess += &third[k] * (2.0 * p[k] / w2);
            }
            let x = DVector::from_vec(domain.coords(node));
            let expanded = ginv.component_mul(&psi_hess).sum() - x.dot(&dpsi) - lambda * p.dot(&dpsi) / w2.sqrt();

            let closed = 0.5 * (dpsi.transpose() * &ginv * &dpsi)[(0, 0)] + explicit_slack(p, q);
            Ok([(direct - expanded).abs(), (direct - closed).abs(), (expanded - closed).abs()])
        })
        .collect();
    let mut worst = [0.0f64; 3];
    for r in rows? {
        for k in 0..3 {
            worst[k] = worst[k].max(r[k]);
        }
    }
    Ok(IdentityReport {
        max_discrepancy: worst.iter().copied().fold(0.0, f64::max),
        direct_vs_expanded: worst[0],
        direct_vs_closed: worst[1],
        expanded_vs_closed: worst[2],
        nodes_checked: nodes.len(),
        residual_norm: residual,
    })
}
