//! Per-command JSON configs. Every field has an explicit default, and the
//! resolved config is echoed into each report.

use std::path::Path;

use lambda_surf::diagnostics::{HalfEquator, DEFAULT_TOL};
use lambda_surf::flow::VolumeMeasure;
use lambda_surf::grid::DomainShape;
use lambda_surf::solver::{LinearStrategy, SolveOptions};
use lambda_surf::{CanonicalGraph, CanonicalSurface, GridDomain, Orientation};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError};

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::ParseConfig { path: path.into(), source })
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn increasing(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() || v.iter().any(|r| !(r.is_finite() && *r > 0.0)) || v.windows(2).any(|w| w[1] <= w[0]) {
        Err(invalid(format!("{name} must be nonempty, positive and strictly increasing")))
    } else {
        Ok(())
    }
}

fn check_surface(s: &CanonicalSurface) -> Result<(), CliError> {
    s.validate().map_err(|e| invalid(e.to_string()))
}

fn check_graph(g: &CanonicalGraph, dim: usize) -> Result<(), CliError> {
    if g.dim() != dim {
        return Err(invalid(format!("boundary graph has dimension {}, domain has {dim}", g.dim())));
    }
    match g {
        CanonicalGraph::Affine { slope, offset } => {
            slope.iter().try_for_each(|s| finite("slope", *s))?;
            finite("offset", *offset)
        }
        CanonicalGraph::Hemisphere { r, .. } | CanonicalGraph::Cylinder { r, .. } => positive("graph radius", *r),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub linear: LinearStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self { tol: o.tol, max_iter: o.max_iter, linear: o.linear }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("solver.tol", self.tol)?;
        if self.max_iter == 0 {
            return Err(invalid("solver.max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, linear: self.linear }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub shape: DomainShape,
    pub spacing: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { dim: 1, shape: DomainShape::Ball { radius: 2.0 }, spacing: 1.0 / 32.0 }
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<GridDomain, CliError> {
        positive("domain.spacing", self.spacing)?;
        GridDomain::new(self.dim, self.shape.clone(), self.spacing).map_err(|e| invalid(e.to_string()))
    }
}

/// Graph problem shared by `solve-graph` and `operator-check`. The boundary
/// values are taken from a closed-form graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphProblem {
    pub domain: DomainConfig,
    pub boundary: CanonicalGraph,
    pub lambda: f64,
    pub solver: SolverConfig,
}

impl Default for GraphProblem {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            boundary: CanonicalGraph::Affine { slope: vec![0.0], offset: 0.0 },
            lambda: 0.3,
            solver: SolverConfig::default(),
        }
    }
}

impl GraphProblem {
    pub fn validate(&self) -> Result<GridDomain, CliError> {
        finite("lambda", self.lambda)?;
        self.solver.validate()?;
        let domain = self.domain.build()?;
        check_graph(&self.boundary, self.domain.dim)?;
        for node in domain.boundary_nodes() {
            if !self.boundary.contains(&domain.coords(node)) {
                return Err(invalid("boundary graph is undefined at a boundary node"));
            }
        }
        Ok(domain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyCanonicalConfig {
    pub surfaces: Vec<CanonicalSurface>,
    pub count: usize,
    /// Also check each surface with its normal reversed.
    pub both_orientations: bool,
    pub tol: f64,
}

impl Default for VerifyCanonicalConfig {
    fn default() -> Self {
        Self {
            surfaces: vec![
                CanonicalSurface::horizontal_plane(2, 0.0),
                CanonicalSurface::sphere(2, 1.0, Orientation::Inward),
                CanonicalSurface::cylinder(2, 1, 0.5, Orientation::Inward),
            ],
            count: 1000,
            both_orientations: true,
            tol: 1e-12,
        }
    }
}

impl VerifyCanonicalConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.surfaces.is_empty() {
            return Err(invalid("surfaces must not be empty"));
        }
        if self.count == 0 {
            return Err(invalid("count must be at least 1"));
        }
        positive("tol", self.tol)?;
        self.surfaces.iter().try_for_each(check_surface)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinConfig {
    pub lambda: f64,
    pub radii: Vec<f64>,
    pub slope: Vec<f64>,
    pub spacing: f64,
    pub solver: SolverConfig,
}

impl Default for BernsteinConfig {
    fn default() -> Self {
        Self { lambda: 0.0, radii: vec![1.0, 2.0, 4.0], slope: vec![0.0], spacing: 1.0 / 32.0, solver: SolverConfig::default() }
    }
}

impl BernsteinConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        finite("lambda", self.lambda)?;
        increasing("radii", &self.radii)?;
        if !(1..=2).contains(&self.slope.len()) {
            return Err(invalid("slope must have 1 or 2 entries"));
        }
        self.slope.iter().try_for_each(|s| finite("slope", *s))?;
        positive("spacing", self.spacing)?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveConfig {
    Circle { radius: f64, vertices: usize },
    Ellipse { a: f64, b: f64, vertices: usize },
    Polygon { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub curve: CurveConfig,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub measure: VolumeMeasure,
    /// Largest admissible relative drift of the weighted volume.
    pub drift_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            curve: CurveConfig::Circle { radius: 1.0, vertices: 128 },
            t_end: 0.5,
            dt: 1e-4,
            record_every: 100,
            measure: VolumeMeasure::Initial,
            drift_tol: 1e-3,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.curve {
            CurveConfig::Circle { radius, .. } => positive("curve.radius", *radius)?,
            CurveConfig::Ellipse { a, b, .. } => {
                positive("curve.a", *a)?;
                positive("curve.b", *b)?;
            }
            CurveConfig::Polygon { points } => {
                points.iter().flatten().try_for_each(|v| finite("curve.points", *v))?;
            }
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(invalid(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        positive("dt", self.dt)?;
        positive("drift_tol", self.drift_tol)?;
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorCheckConfig {
    pub problem: GraphProblem,
    /// Residual level accepted as a solution; `null` uses the default
    /// `h (1 + max |D²f|)²`.
    pub residual_tol: Option<f64>,
    /// Radii at which the eigenvalue condition margin is reported.
    pub radii: Vec<f64>,
}

impl Default for OperatorCheckConfig {
    fn default() -> Self {
        Self { problem: GraphProblem::default(), residual_tol: None, radii: vec![0.5, 1.0, 2.0] }
    }
}

impl OperatorCheckConfig {
    pub fn validate(&self) -> Result<GridDomain, CliError> {
        if let Some(t) = self.residual_tol {
            positive("residual_tol", t)?;
        }
        increasing("radii", &self.radii)?;
        self.problem.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NormalSource {
    /// Normals of quasi-uniform samples of a canonical surface.
    Surface { surface: CanonicalSurface, count: usize },
    /// Normals of a closed-form graph at the nodes of a grid domain.
    Graph { graph: CanonicalGraph, domain: DomainConfig },
    /// Explicit unit vectors.
    List { normals: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussMapConfig {
    pub source: NormalSource,
    pub tol: f64,
    pub eps: f64,
    /// Axes of the excluded half-equator; `null` selects the last axis as
    /// height and the one before it as the half-space axis.
    pub embedding: Option<HalfEquator>,
}

impl Default for GaussMapConfig {
    fn default() -> Self {
        Self {
            source: NormalSource::Surface { surface: CanonicalSurface::cylinder(2, 1, 1.0, Orientation::Inward), count: 500 },
            tol: DEFAULT_TOL,
            eps: 1e-9,
            embedding: None,
        }
    }
}

impl GaussMapConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("tol", self.tol)?;
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(invalid(format!("eps must be nonnegative, got {}", self.eps)));
        }
        match &self.source {
            NormalSource::Surface { surface, count } => {
                check_surface(surface)?;
                if *count == 0 {
                    return Err(invalid("source.count must be at least 1"));
                }
            }
            NormalSource::Graph { graph, domain } => check_graph(graph, domain.dim)?,
            NormalSource::List { normals } => {
                if normals.is_empty() {
                    return Err(invalid("source.normals must not be empty"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaGrowthConfig {
    pub surface: CanonicalSurface,
    pub radii: Vec<f64>,
    /// Allowed excess of the fitted exponent over the bound.
    pub slack: f64,
}

impl Default for AreaGrowthConfig {
    fn default() -> Self {
        Self {
            surface: CanonicalSurface::cylinder(2, 1, 1.0, Orientation::Inward),
            radii: vec![1.5, 2.0, 4.0, 8.0, 16.0, 32.0],
            slack: 0.05,
        }
    }
}

impl AreaGrowthConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_surface(&self.surface)?;
        increasing("radii", &self.radii)?;
        if self.radii[0] < 1.0 {
            return Err(invalid("radii must be at least 1"));
        }
        if self.radii.len() < 2 {
            return Err(invalid("at least two radii are needed for a slope"));
        }
        if !(self.slack.is_finite() && self.slack >= 0.0) {
            return Err(invalid("slack must be nonnegative"));
        }
        Ok(())
    }
}
