//! Gauss-map hemisphere certificates and area-growth exponents.

mod growth;
mod hemisphere;

use thiserror::Error;

pub use growth::{
    ball_volume, graph_curvature_infima, growth_bound_exponent, intersection_area, log_log_slope, measured_growth,
    sphere_area, GrowthReport, SampledInfima,
};
pub use hemisphere::{
    closed_hemisphere_certificate, hemisphere_margin, open_hemisphere_certificate, optimal_hemisphere,
    theorem2_region_test, HalfEquator, HemisphereCertificate, RegionReport, Verdict, DEFAULT_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("no normals given")]
    NoNormals,
    #[error("normal {index} has length {norm}, expected 1")]
    NotUnit { index: usize, norm: f64 },
    #[error("normal {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, got: usize, expected: usize },
    #[error("embedding axes ({height}, {half}) invalid for dimension {dim}")]
    BadEmbedding { height: usize, half: usize, dim: usize },
    #[error("radii must be >= 1, finite and strictly increasing")]
    BadRadii,
    #[error("need at least two radii for a slope fit")]
    TooFewRadii,
    #[error("surface does not meet the ball of radius {0}")]
    EmptyIntersection(f64),
    #[error(transparent)]
    Surface(#[from] crate::surfaces::SurfaceError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}
