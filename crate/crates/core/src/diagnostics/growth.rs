//! Area of `X(M) ∩ B_r(0)` for canonical surfaces and the polynomial growth
//! exponent bound `n + λ²/2 - inf(λ - H)²/2 - inf H²/2`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::DiagnosticsError;
use crate::geometry::{lambda_residual, mean_curvature};
use crate::grid::ScalarField;
use crate::surfaces::CanonicalSurface;

/// `n + λ²/2 - 2β - inf H²/2` with `β = inf(λ - H)² / 4`.
pub fn growth_bound_exponent(lambda: f64, inf_h_sq: f64, inf_lambda_minus_h_sq: f64, n: usize) -> f64 {
    n as f64 + 0.5 * lambda * lambda - 0.5 * inf_lambda_minus_h_sq - 0.5 * inf_h_sq
}

fn gamma_half_int(twice: usize) -> f64 {
    // Γ(twice / 2) for twice >= 1
    if twice % 2 == 0 {
        (1..twice / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while (2.0 * x) < twice as f64 - 0.5 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Volume of the unit ball in `R^n`.
pub fn ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half_int(n + 2)
}

/// Area of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    2.0 * PI.powf((k + 1) as f64 / 2.0) / gamma_half_int(k + 1)
}

/// Exact `n`-dimensional measure of `surface ∩ B_r(0)`.
pub fn intersection_area(surface: &CanonicalSurface, r: f64) -> Result<f64, DiagnosticsError> {
    surface.validate()?;
    let n = surface.dim();
    Ok(match *surface {
        CanonicalSurface::Plane { offset, .. } => {
            let s = r * r - offset * offset;
            if s > 0.0 {
                ball_volume(n) * s.powf(n as f64 / 2.0)
            } else {
                0.0
            }
        }
        CanonicalSurface::Sphere { r: rho, .. } => {
            if r >= rho {
                sphere_area(n) * rho.powi(n as i32)
            } else {
                0.0
            }
        }
        CanonicalSurface::Cylinder { k, r: rho, .. } => {
            let s = r * r - rho * rho;
            if s > 0.0 {
                sphere_area(k) * rho.powi(k as i32) * ball_volume(n - k) * s.powf((n - k) as f64 / 2.0)
            } else {
                0.0
            }
        }
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub n: usize,
    pub lambda: f64,
    pub radii: Vec<f64>,
    pub areas: Vec<f64>,
    /// Slope over the upper half of the radii.
    pub fitted_exponent: f64,
    pub bound_exponent: f64,
    pub inf_h_sq: f64,
    pub inf_lambda_minus_h_sq: f64,
}

/// Exact areas on the given radii, fitted growth exponent and the bound.
/// Canonical surfaces have constant `H`, so the infima are exact.
pub fn measured_growth(surface: &CanonicalSurface, radii: &[f64]) -> Result<GrowthReport, DiagnosticsError> {
    if radii.iter().any(|r| !(r.is_finite() && *r >= 1.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DiagnosticsError::BadRadii);
    }
    if radii.len() < 2 {
        return Err(DiagnosticsError::TooFewRadii);
    }
    let areas = radii
        .iter()
        .map(|&r| match intersection_area(surface, r)? {
            a if a > 0.0 => Ok(a),
            _ => Err(DiagnosticsError::EmptyIntersection(r)),
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let start = radii.len() / 2;
    let fitted_exponent = log_log_slope(&radii[start..], &areas[start..]);
    let n = surface.dim();
    let lambda = surface.canonical_lambda();
    let h = surface.mean_curvature();
    let inf_h_sq = h * h;
    let inf_lambda_minus_h_sq = (lambda - h).powi(2);
    Ok(GrowthReport {
        n,
        lambda,
        radii: radii.to_vec(),
        areas,
        fitted_exponent,
        bound_exponent: growth_bound_exponent(lambda, inf_h_sq, inf_lambda_minus_h_sq, n),
        inf_h_sq,
        inf_lambda_minus_h_sq,
    })
}

/// Infima over interior nodes of a sampled graph; they only bound the
/// infima over the whole hypersurface from above.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledInfima {
    pub inf_h_sq: f64,
    pub inf_lambda_minus_h_sq: f64,
    pub nodes: usize,
    /// Max of `|<X, N> + H - λ|` on the same nodes.
    pub max_lambda_residual: f64,
}

pub fn graph_curvature_infima(field: &ScalarField, lambda: f64) -> Result<SampledInfima, DiagnosticsError> {
    let domain = field.domain();
    let nodes = domain.interior_nodes();
    let per = nodes
        .par_iter()
        .map(|&node| {
            let gh = domain.gradhess(field.values(), node)?;
            let x = nalgebra::DVector::from_vec(domain.coords(node));
            let h = mean_curvature(&gh);
            let res = lambda_residual(&x, field.values()[node], &gh, lambda);
            Ok((h * h, (lambda - h).powi(2), res.abs()))
        })
        .collect::<Result<Vec<_>, crate::grid::GridError>>()?;
    let mut out = SampledInfima {
        inf_h_sq: f64::INFINITY,
        inf_lambda_minus_h_sq: f64::INFINITY,
        nodes: per.len(),
        max_lambda_residual: 0.0,
    };
    for (a, b, c) in per {
        out.inf_h_sq = out.inf_h_sq.min(a);
        out.inf_lambda_minus_h_sq = out.inf_lambda_minus_h_sq.min(b);
        out.max_lambda_residual = out.max_lambda_residual.max(c);
    }
    Ok(out)
}
