//! Pointwise differential geometry of graphs `X = (x, f(x))` in `R^{n+1}`.
//!
//! Graphs are always oriented by the upward unit normal
//! `N = (-Df, 1) / sqrt(1 + |Df|^2)`. With that orientation the mean
//! curvature is `H = sum g^{ij} f_ij / sqrt(1 + |Df|^2)` and the support
//! function is `<X, N> = (f - x . Df) / sqrt(1 + |Df|^2)`, so the upper
//! hemisphere of radius `r` has `H = -n/r`, `<X, N> = r`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{GridError, ScalarField};

/// Symmetry tolerance for analytically supplied Hessians.
pub const HESSIAN_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: gradient has {grad} entries, hessian is {rows}x{cols}")]
    DimensionMismatch { grad: usize, rows: usize, cols: usize },
    #[error("hessian is not symmetric (max asymmetry {0:e})")]
    AsymmetricHessian(f64),
    #[error("non-finite input")]
    NonFinite,
}

/// First and second derivatives of the graph function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl GradHess {
    /// Checked constructor for analytically supplied derivatives.
    pub fn new(grad: DVector<f64>, hess: DMatrix<f64>) -> Result<Self, GeometryError> {
        let n = grad.len();
        if hess.nrows() != n || hess.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                grad: n,
                rows: hess.nrows(),
                cols: hess.ncols(),
            });
        }
        if grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let asym = (&hess - hess.transpose()).amax();
        let scale = 1.0 + hess.amax();
        if asym > HESSIAN_SYMMETRY_TOL * scale {
            return Err(GeometryError::AsymmetricHessian(asym));
        }
        Ok(Self { grad, hess })
    }

    /// Builds from a possibly asymmetric Hessian by averaging mixed partials.
    pub fn symmetrized(grad: DVector<f64>, hess: DMatrix<f64>) -> Self {
        let hess = (&hess + hess.transpose()) * 0.5;
        Self { grad, hess }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// `W = sqrt(1 + |Df|^2)`.
    pub fn area_factor(&self) -> f64 {
        area_factor(&self.grad)
    }
}

/// Full geometric package of a graph at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGeometry {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_hess: GradHess,
    pub metric: DMatrix<f64>,
    pub inv_metric: DMatrix<f64>,
    pub normal: DVector<f64>,
    pub mean_curvature: f64,
    pub support: f64,
    pub psi: f64,
}

pub fn area_factor(grad: &DVector<f64>) -> f64 {
    (1.0 + grad.norm_squared()).sqrt()
}

/// `g_ij = delta_ij + f_i f_j`.
pub fn induced_metric(grad: &DVector<f64>) -> DMatrix<f64> {
    let n = grad.len();
    DMatrix::identity(n, n) + grad * grad.transpose()
}

/// `g^ij = delta_ij - f_i f_j / (1 + |Df|^2)`, the rank-one closed form.
pub fn inverse_metric(grad: &DVector<f64>) -> DMatrix<f64> {
    let n = grad.len();
    let w2 = 1.0 + grad.norm_squared();
    DMatrix::identity(n, n) - grad * grad.transpose() / w2
}

/// Upward unit normal in `R^{n+1}`.
pub fn unit_normal(grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    let w = area_factor(grad);
    DVector::from_fn(n + 1, |i, _| if i < n { -grad[i] / w } else { 1.0 / w })
}

pub fn mean_curvature(gh: &GradHess) -> f64 {
    let ginv = inverse_metric(&gh.grad);
    ginv.component_mul(&gh.hess).sum() / gh.area_factor()
}

/// `<X, N>` for the graph point `X = (x, f)`.
pub fn support_function(x: &DVector<f64>, f: f64, grad: &DVector<f64>) -> f64 {
    (f - x.dot(grad)) / area_factor(grad)
}

/// `<X, N> + H - lambda`; zero exactly on lambda-hypersurfaces.
pub fn lambda_residual(x: &DVector<f64>, f: f64, gh: &GradHess, lambda: f64) -> f64 {
    support_function(x, f, &gh.grad) + mean_curvature(gh) - lambda
}

/// `psi = log det(g_ij) = log(1 + |Df|^2)`.
pub fn log_det_metric(grad: &DVector<f64>) -> f64 {
    grad.norm_squared().ln_1p()
}

/// Smallest eigenvalue of `I + Df Df^T`: 1 when `n >= 2`, `1 + |Df|^2` when `n = 1`.
pub fn min_metric_eigenvalue(grad: &DVector<f64>) -> f64 {
    if grad.len() >= 2 {
        1.0
    } else {
        1.0 + grad.norm_squared()
    }
}

pub fn point_geometry(x: &DVector<f64>, f: f64, gh: &GradHess) -> PointGeometry {
    PointGeometry {
        x: x.clone(),
        f,
        grad_hess: gh.clone(),
        metric: induced_metric(&gh.grad),
        inv_metric: inverse_metric(&gh.grad),
        normal: unit_normal(&gh.grad),
        mean_curvature: mean_curvature(gh),
        support: support_function(x, f, &gh.grad),
        psi: log_det_metric(&gh.grad),
    }
}

/// Second-order central differences of a sampled field at an interior node.
pub fn finite_difference_gradhess(field: &ScalarField, node: usize) -> Result<GradHess, GridError> {
    field.domain().gradhess(field.values(), node)
}
