//! Uniform grids over boxes and balls in `R^1` / `R^2`, sampled fields and
//! central-difference stencils.
//!
//! Ball domains are masked boxes: a node belongs to the domain when
//! `|x| <= R`, and it is interior when its whole `3^n` neighbourhood does.
//! Every in-domain node carries a depth: 0 on the Dirichlet layer, `k` when
//! all neighbours have depth at least `k - 1`. First/second derivatives need
//! depth 1, third derivatives (differences of the Hessian) need depth 2.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GradHess;

/// Minimum number of interior nodes along each axis.
pub const MIN_INTERIOR_PER_AXIS: usize = 8;

const MAX_DEPTH: u8 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension {0} unsupported (1 or 2)")]
    UnsupportedDimension(usize),
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("extent {extent} along axis {axis} is not a multiple of h = {spacing}")]
    IncommensurateSpacing { axis: usize, extent: f64, spacing: f64 },
    #[error("only {got} interior nodes along axis {axis}, need at least {MIN_INTERIOR_PER_AXIS}")]
    TooFewInteriorNodes { axis: usize, got: usize },
    #[error("invalid domain: {0}")]
    InvalidShape(String),
    #[error("node {node} lacks a depth-{needed} stencil (depth {depth})")]
    BoundaryStencil { node: usize, needed: u8, depth: i8 },
    #[error("field has {got} values, domain has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite field value at node {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainShape {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    shape: DomainShape,
    spacing: f64,
    lower: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
    // -1 outside, 0 boundary, >= 1 interior (capped)
    depth: Vec<i8>,
}

impl GridDomain {
    pub fn new(dim: usize, shape: DomainShape, spacing: f64) -> Result<Self, GridError> {
        if !(1..=2).contains(&dim) {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(GridError::BadSpacing(spacing));
        }
        let (lower, upper) = match &shape {
            DomainShape::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(GridError::InvalidShape(format!(
                        "box bounds must have {dim} entries"
                    )));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && u > l)) {
                    return Err(GridError::InvalidShape("box needs lower < upper".into()));
                }
                (lower.clone(), upper.clone())
            }
            DomainShape::Ball { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GridError::InvalidShape(format!("ball radius {radius}")));
                }
                (vec![-radius; dim], vec![*radius; dim])
            }
        };
        let mut counts = Vec::with_capacity(dim);
        for axis in 0..dim {
            let extent = upper[axis] - lower[axis];
            let cells = (extent / spacing).round();
            if (cells * spacing - extent).abs() > 1e-9 * extent.max(1.0) {
                return Err(GridError::IncommensurateSpacing { axis, extent, spacing });
            }
            counts.push(cells as usize + 1);
        }
        let mut strides = vec![1; dim];
        for axis in 1..dim {
            strides[axis] = strides[axis - 1] * counts[axis - 1];
        }
        let total: usize = counts.iter().product();

        let mut domain = Self {
            dim,
            shape,
            spacing,
            lower,
            counts,
            strides,
            depth: vec![-1; total],
        };
        domain.classify();
        domain.check_interior_counts()?;
        Ok(domain)
    }

    pub fn ball(dim: usize, radius: f64, spacing: f64) -> Result<Self, GridError> {
        Self::new(dim, DomainShape::Ball { radius }, spacing)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, spacing: f64) -> Result<Self, GridError> {
        Self::new(lower.len(), DomainShape::Box { lower, upper }, spacing)
    }

    fn classify(&mut self) {
        let total = self.depth.len();
        let mut x = vec![0.0; self.dim];
        for node in 0..total {
            self.coords_into(node, &mut x);
            let inside = match &self.shape {
                DomainShape::Box { .. } => true,
                DomainShape::Ball { radius } => {
                    x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius + 1e-9 * self.spacing
                }
            };
            self.depth[node] = if inside { 0 } else { -1 };
        }
        let offsets = self.neighbourhood_offsets();
        for level in 1..=MAX_DEPTH as i8 {
            let prev = self.depth.clone();
            for node in 0..total {
                if prev[node] < level - 1 {
                    continue;
                }
                let ok = offsets.iter().all(|off| match self.offset(node, off) {
                    Some(nb) => prev[nb] >= level - 1,
                    None => false,
                });
                if ok {
                    self.depth[node] = level;
                }
            }
        }
    }

    fn check_interior_counts(&self) -> Result<(), GridError> {
        for axis in 0..self.dim {
            // count interior nodes on the axis line through the grid centre
            let mut idx: Vec<usize> = self.counts.iter().map(|c| c / 2).collect();
            let mut got = 0;
            for i in 0..self.counts[axis] {
                idx[axis] = i;
                if self.depth[self.flat(&idx)] >= 1 {
                    got += 1;
                }
            }
            if got < MIN_INTERIOR_PER_AXIS {
                return Err(GridError::TooFewInteriorNodes { axis, got });
            }
        }
        Ok(())
    }

    /// All offsets in `{-1, 0, 1}^n` except the origin.
    fn neighbourhood_offsets(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let total = 3usize.pow(self.dim as u32);
        for code in 0..total {
            let mut c = code;
            let off: Vec<i64> = (0..self.dim)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect();
            if off.iter().any(|&d| d != 0) {
                out.push(off);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Neighbour at an integer offset, if it lies on the grid.
    pub fn offset(&self, node: usize, off: &[i64]) -> Option<usize> {
        let mut rest = node;
        let mut out = 0;
        for axis in 0..self.dim {
            let c = self.counts[axis];
            let i = (rest % c) as i64 + off[axis];
            rest /= c;
            if i < 0 || i >= c as i64 {
                return None;
            }
            out += i as usize * self.strides[axis];
        }
        Some(out)
    }

    fn step(&self, node: usize, axis: usize, delta: i64) -> usize {
        let mut off = [0i64; 2];
        off[axis] = delta;
        self.offset(node, &off[..self.dim]).expect("stencil neighbour inside grid")
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for axis in 0..self.dim {
            let c = self.counts[axis];
            out[axis] = self.lower[axis] + (rest % c) as f64 * self.spacing;
            rest /= c;
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.coords_into(node, &mut x);
        x
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        match self.depth[node] {
            d if d < 0 => NodeKind::Outside,
            0 => NodeKind::Boundary,
            _ => NodeKind::Interior,
        }
    }

    pub fn depth(&self, node: usize) -> i8 {
        self.depth[node]
    }

    pub fn nodes_with_depth(&self, min_depth: i8) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.depth[n] >= min_depth).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        self.nodes_with_depth(1)
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.depth[n] == 0).collect()
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        self.depth.iter().map(|&d| d == 0).collect()
    }

    pub(crate) fn require_depth(&self, node: usize, needed: u8) -> Result<(), GridError> {
        let depth = *self.depth.get(node).unwrap_or(&-1);
        if depth < needed as i8 {
            Err(GridError::BoundaryStencil { node, needed, depth })
        } else {
            Ok(())
        }
    }

    /// Central first and second differences on a raw value slice.
    /// The Hessian is symmetric by construction (a single mixed stencil).
    pub fn gradhess(&self, values: &[f64], node: usize) -> Result<GradHess, GridError> {
        self.require_depth(node, 1)?;
        let n = self.dim;
        let h = self.spacing;
        let f0 = values[node];
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            let fp = values[self.step(node, i, 1)];
            let fm = values[self.step(node, i, -1)];
            grad[i] = (fp - fm) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let mut off = [0i64; 2];
                let mut corner = |si: i64, sj: i64| {
                    off[i] = si;
                    off[j] = sj;
                    values[self.offset(node, &off[..n]).expect("corner inside grid")]
                };
                let fij = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * h * h);
                hess[(i, j)] = fij;
                hess[(j, i)] = fij;
            }
        }
        Ok(GradHess::symmetrized(grad, hess))
    }

    /// Central gradient only.
    pub fn gradient(&self, values: &[f64], node: usize) -> Result<DVector<f64>, GridError> {
        self.require_depth(node, 1)?;
        let h = self.spacing;
        Ok(DVector::from_fn(self.dim, |i, _| {
            (values[self.step(node, i, 1)] - values[self.step(node, i, -1)]) / (2.0 * h)
        }))
    }

    /// Third derivatives `t[p][(i, j)] = f_{ijp}` as central differences of
    /// the Hessian stencil, symmetrized over all index permutations.
    pub fn third_derivatives(&self, values: &[f64], node: usize) -> Result<Vec<DMatrix<f64>>, GridError> {
        self.require_depth(node, 2)?;
        let n = self.dim;
        let h = self.spacing;
        let mut raw = Vec::with_capacity(n);
        for p in 0..n {
            let hp = self.gradhess(values, self.step(node, p, 1))?.hess;
            let hm = self.gradhess(values, self.step(node, p, -1))?.hess;
            raw.push((hp - hm) / (2.0 * h));
        }
        let mut out = vec![DMatrix::zeros(n, n); n];
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let s = raw[p][(i, j)] + raw[p][(j, i)] + raw[i][(p, j)] + raw[i][(j, p)] + raw[j][(p, i)] + raw[j][(i, p)];
                    out[p][(i, j)] = s / 6.0;
                }
            }
        }
        Ok(out)
    }
}

/// Values of a function on every node of a domain. Nodes outside a ball
/// domain hold 0 and are never read by stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != domain.len() {
            return Err(GridError::LengthMismatch { expected: domain.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let values = vec![0.0; domain.len()];
        Self { domain, values }
    }

    /// Samples `f` at every in-domain node.
    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        let mut x = vec![0.0; domain.dim()];
        let values = (0..domain.len())
            .map(|node| {
                if domain.kind(node) == NodeKind::Outside {
                    0.0
                } else {
                    domain.coords_into(node, &mut x);
                    f(&x)
                }
            })
            .collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        self.domain.boundary_mask()
    }

    pub fn spacing(&self) -> f64 {
        self.domain.spacing()
    }

    pub fn gradhess(&self, node: usize) -> Result<GradHess, GridError> {
        self.domain.gradhess(&self.values, node)
    }
}
