//! Weighted volume-preserving curvature flow of closed plane curves,
//!
//! ```text
//! dX/dt = (H(t) - α(t)) N(t),
//! α(t) = Σ H ⟨N(t), N₀⟩ e^{-|X₀|²/2} w / Σ ⟨N(t), N₀⟩ e^{-|X₀|²/2} w,
//! ```
//!
//! discretised on counter-clockwise polygons with explicit Euler steps.
//! Sign convention: `N` is the inward unit normal and the curvature vector is
//! `H N`, so a circle of radius ρ has `H = 1/ρ` and `<X, N> = -ρ`, matching the
//! inward-oriented sphere `λ = n/r - r` with `n = 1`.
//!
//! `N₀`, `X₀` (and, for [`VolumeMeasure::Initial`], the vertex weights) are
//! frozen at construction. The weighted volume
//! `V = Σ ⟨X(t), N₀⟩ e^{-|X₀|²/2} w` and the weighted area
//! `A = Σ e^{-|X(t)|²/2} w(t)` are reported along the run.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vector2<f64>;

pub const MIN_VERTICES: usize = 16;
/// `dt <= STABILITY_FACTOR * (min edge)²`.
pub const STABILITY_FACTOR: f64 = 0.25;
pub const DEGENERATE_EDGE_RATIO: f64 = 1e-12;
pub const ALPHA_DENOMINATOR_RATIO: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("curve needs at least {MIN_VERTICES} vertices, got {0}")]
    TooFewVertices(usize),
    #[error("invalid curve parameter: {0}")]
    BadParameter(&'static str),
    #[error("non-finite vertex coordinates")]
    NonFinite,
    #[error("edge {edge} is degenerate (length {length:e})")]
    DegenerateEdge { edge: usize, length: f64 },
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    Unstable { dt: f64, bound: f64 },
    #[error("α denominator {denominator:e} vanishes at t = {time}")]
    AlphaUndefined { denominator: f64, time: f64 },
    #[error("curve self-intersects (edges {0} and {1}) at t = {2}")]
    SelfIntersection(usize, usize, f64),
    #[error("curve is not simple (edges {0} and {1})")]
    NotSimple(usize, usize),
}

/// Which vertex weights enter `α` and `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeMeasure {
    /// Arclength weights of the initial curve, frozen.
    #[default]
    Initial,
    /// Arclength weights of the current curve.
    Current,
}

#[derive(Debug)]
struct Reference {
    normals: Vec<Point>,
    positions: Vec<Point>,
    weights: Vec<f64>,
    gauss: Vec<f64>,
}

/// A polygon together with its frozen initial data. Immutable: stepping
/// returns a new state sharing the reference arrays.
#[derive(Debug, Clone)]
pub struct CurveState {
    vertices: Vec<Point>,
    reference: Arc<Reference>,
    time: f64,
    measure: VolumeMeasure,
}

/// Per-vertex discrete geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGeometry {
    pub normals: Vec<Point>,
    pub curvature: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Curvature of the circle through three points, positive when the turn
/// `prev -> cur -> next` is counter-clockwise.
pub fn circumscribed_curvature(prev: &Point, cur: &Point, next: &Point) -> f64 {
    let a = cur - prev;
    let b = next - cur;
    let c = next - prev;
    let cross = a.x * b.y - a.y * b.x;
    2.0 * cross / (a.norm() * b.norm() * c.norm())
}

fn left_normal(v: &Point) -> Point {
    Point::new(-v.y, v.x) / v.norm()
}

fn signed_area(vertices: &[Point]) -> f64 {
    let m = vertices.len();
    (0..m)
        .map(|i| {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % m];
            a.x * b.y - a.y * b.x
        })
        .sum::<f64>()
        / 2.0
}

fn check_edges(vertices: &[Point]) -> Result<(), FlowError> {
    let (mut lo, mut hi) = (vertices[0], vertices[0]);
    for v in vertices {
        if !(v.x.is_finite() && v.y.is_finite()) {
            return Err(FlowError::NonFinite);
        }
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let diameter = (hi - lo).norm();
    let m = vertices.len();
    for i in 0..m {
        let length = (vertices[(i + 1) % m] - vertices[i]).norm();
        if length < DEGENERATE_EDGE_RATIO * diameter || length == 0.0 {
            return Err(FlowError::DegenerateEdge { edge: i, length });
        }
    }
    Ok(())
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// First pair of non-adjacent intersecting edges, found with a uniform
/// spatial hash whose cell is the longest edge.
pub fn find_self_intersection(vertices: &[Point]) -> Option<(usize, usize)> {
    let m = vertices.len();
    let cell = (0..m).map(|i| (vertices[(i + 1) % m] - vertices[i]).norm()).fold(0.0, f64::max);
    if !(cell > 0.0) {
        return Some((0, 0));
    }
    let key = |v: f64| (v / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..m {
        let (a, b) = (&vertices[i], &vertices[(i + 1) % m]);
        for cx in key(a.x.min(b.x))..=key(a.x.max(b.x)) {
            for cy in key(a.y.min(b.y))..=key(a.y.max(b.y)) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for edges in grid.values() {
        for (s, &i) in edges.iter().enumerate() {
            for &j in &edges[s + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if j == i + 1 || (i == 0 && j == m - 1) {
                    continue;
                }
                let hit = segments_intersect(&vertices[i], &vertices[(i + 1) % m], &vertices[j], &vertices[(j + 1) % m]);
                if hit && best.map_or(true, |b| (i, j) < b) {
                    best = Some((i, j));
                }
            }
        }
    }
    best
}

impl CurveState {
    /// Builds a state from a closed polygon. Clockwise input is reversed so
    /// that the left normal points inward.
    pub fn from_vertices(mut vertices: Vec<Point>, measure: VolumeMeasure) -> Result<Self, FlowError> {
        if vertices.len() < MIN_VERTICES {
            return Err(FlowError::TooFewVertices(vertices.len()));
        }
        check_edges(&vertices)?;
        if let Some((i, j)) = find_self_intersection(&vertices) {
            return Err(FlowError::NotSimple(i, j));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let geom = curve_geometry_of(&vertices);
        let gauss = vertices.iter().map(|x| (-0.5 * x.norm_squared()).exp()).collect();
        let reference = Reference { normals: geom.normals, positions: vertices.clone(), weights: geom.weights, gauss };
        Ok(Self { vertices, reference: Arc::new(reference), time: 0.0, measure })
    }

    /// Regular `m`-gon inscribed in the circle of radius `radius` about the origin.
    pub fn circle(radius: f64, m: usize, measure: VolumeMeasure) -> Result<Self, FlowError> {
        Self::ellipse(radius, radius, m, measure)
    }

    /// Vertices `(a cos θ_i, b sin θ_i)` at equally spaced parameters.
    pub fn ellipse(a: f64, b: f64, m: usize, measure: VolumeMeasure) -> Result<Self, FlowError> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(FlowError::BadParameter("semi-axes must be positive"));
        }
        let vertices = (0..m)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                Point::new(a * t.cos(), b * t.sin())
            })
            .collect();
        Self::from_vertices(vertices, measure)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn measure(&self) -> VolumeMeasure {
        self.measure
    }

    pub fn initial_normals(&self) -> &[Point] {
        &self.reference.normals
    }

    pub fn initial_positions(&self) -> &[Point] {
        &self.reference.positions
    }

    pub fn min_edge(&self) -> f64 {
        let m = self.len();
        (0..m).map(|i| (self.vertices[(i + 1) % m] - self.vertices[i]).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn stability_bound(&self) -> f64 {
        STABILITY_FACTOR * self.min_edge().powi(2)
    }

    fn volume_weights<'a>(&'a self, geom: &'a CurveGeometry) -> &'a [f64] {
        match self.measure {
            VolumeMeasure::Initial => &self.reference.weights,
            VolumeMeasure::Current => &geom.weights,
        }
    }
}

fn curve_geometry_of(vertices: &[Point]) -> CurveGeometry {
    let m = vertices.len();
    let per: Vec<(Point, f64, f64)> = (0..m)
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            let prev = &vertices[(i + m - 1) % m];
            let cur = &vertices[i];
            let next = &vertices[(i + 1) % m];
            let w = 0.5 * ((cur - prev).norm() + (next - cur).norm());
            (left_normal(&(next - prev)), circumscribed_curvature(prev, cur, next), w)
        })
        .collect();
    let mut geom = CurveGeometry { normals: Vec::with_capacity(m), curvature: Vec::with_capacity(m), weights: Vec::with_capacity(m) };
    for (n, k, w) in per {
        geom.normals.push(n);
        geom.curvature.push(k);
        geom.weights.push(w);
    }
    geom
}

/// Inward normals, curvature `H` (so that the curvature vector is `H N`) and
/// half-sum-of-edges weights at every vertex.
pub fn curve_geometry(state: &CurveState) -> Result<CurveGeometry, FlowError> {
    check_edges(&state.vertices)?;
    Ok(curve_geometry_of(&state.vertices))
}

/// Numerator and denominator of the α quotient.
fn alpha_sums(state: &CurveState, geom: &CurveGeometry) -> (f64, f64, f64) {
    let r = &state.reference;
    let w = state.volume_weights(geom);
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for i in 0..state.len() {
        let d = geom.normals[i].dot(&r.normals[i]) * r.gauss[i] * w[i];
        num += geom.curvature[i] * d;
        den += d;
        scale += r.gauss[i] * w[i];
    }
    (num, den, scale)
}

fn alpha_with(state: &CurveState, geom: &CurveGeometry) -> Result<f64, FlowError> {
    let (num, den, scale) = alpha_sums(state, geom);
    if den.abs() < ALPHA_DENOMINATOR_RATIO * scale {
        return Err(FlowError::AlphaUndefined { denominator: den, time: state.time });
    }
    Ok(num / den)
}

pub fn alpha(state: &CurveState) -> Result<f64, FlowError> {
    alpha_with(state, &curve_geometry(state)?)
}

fn volume_with(state: &CurveState, geom: &CurveGeometry) -> f64 {
    let r = &state.reference;
    let w = state.volume_weights(geom);
    (0..state.len()).map(|i| state.vertices[i].dot(&r.normals[i]) * r.gauss[i] * w[i]).sum()
}

pub fn weighted_volume(state: &CurveState) -> Result<f64, FlowError> {
    Ok(volume_with(state, &curve_geometry(state)?))
}

fn area_with(state: &CurveState, geom: &CurveGeometry) -> f64 {
    (0..state.len()).map(|i| (-0.5 * state.vertices[i].norm_squared()).exp() * geom.weights[i]).sum()
}

pub fn weighted_area(state: &CurveState) -> Result<f64, FlowError> {
    Ok(area_with(state, &curve_geometry(state)?))
}

/// One explicit Euler step.
pub fn step(state: &CurveState, dt: f64) -> Result<CurveState, FlowError> {
    step_with(state, dt, None)
}

/// Euler step with an optional override of `α` (e.g. 0 for pure curve
/// shortening).
pub fn step_with(state: &CurveState, dt: f64, alpha_override: Option<f64>) -> Result<CurveState, FlowError> {
    let bound = state.stability_bound();
    if !(dt > 0.0 && dt <= bound) {
        return Err(FlowError::Unstable { dt, bound });
    }
    let geom = curve_geometry(state)?;
    let a = match alpha_override {
        Some(a) => a,
        None => alpha_with(state, &geom)?,
    };
    let vertices: Vec<Point> = (0..state.len())
        .map(|i| state.vertices[i] + dt * (geom.curvature[i] - a) * geom.normals[i])
        .collect();
    let time = state.time + dt;
    check_edges(&vertices)?;
    if let Some((i, j)) = find_self_intersection(&vertices) {
        return Err(FlowError::SelfIntersection(i, j, time));
    }
    Ok(CurveState { vertices, reference: state.reference.clone(), time, measure: state.measure })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRow {
    pub t: f64,
    pub alpha: f64,
    pub volume: f64,
    pub area: f64,
    pub max_speed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowDiagnostics {
    pub rows: Vec<FlowRow>,
    pub initial_volume: f64,
    /// Max over all steps (recorded or not) of `|V(t) - V(0)| / |V(0)|`.
    pub max_relative_drift: f64,
    pub steps_taken: usize,
    pub halted: Option<String>,
    #[serde(skip)]
    pub halt_error: Option<FlowError>,
    #[serde(skip)]
    pub final_state: Option<CurveState>,
}

fn row(state: &CurveState) -> Result<(FlowRow, f64), FlowError> {
    let geom = curve_geometry(state)?;
    let a = alpha_with(state, &geom)?;
    let volume = volume_with(state, &geom);
    let max_speed = geom.curvature.iter().map(|k| (k - a).abs()).fold(0.0, f64::max);
    Ok((FlowRow { t: state.time, alpha: a, volume, area: area_with(state, &geom), max_speed }, volume))
}

/// Integrates to time `t_end` with steps of `dt` (the last one shortened to
/// land on `t_end`), recording every `record_every` steps and at the end.
/// Step failures stop the run; the rows so far are returned with the reason.
pub fn run(initial: &CurveState, t_end: f64, dt: f64, record_every: usize) -> Result<FlowDiagnostics, FlowError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(FlowError::BadParameter("final time must be nonnegative"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FlowError::BadParameter("time step must be positive"));
    }
    if record_every == 0 {
        return Err(FlowError::BadParameter("record interval must be positive"));
    }
    let (first, v0) = row(initial)?;
    let mut diag = FlowDiagnostics {
        rows: vec![first],
        initial_volume: v0,
        max_relative_drift: 0.0,
        steps_taken: 0,
        halted: None,
        halt_error: None,
        final_state: None,
    };
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut state = initial.clone();
    for s in 1..=steps {
        let h = if s == steps { t_end - (steps - 1) as f64 * dt } else { dt };
        let next = step(&state, h).and_then(|st| {
            let r = row(&st)?;
            Ok((st, r))
        });
        match next {
            Ok((st, (r, v))) => {
                diag.max_relative_drift = diag.max_relative_drift.max((v - v0).abs() / v0.abs());
                if s % record_every == 0 || s == steps {
                    diag.rows.push(r);
                }
                diag.steps_taken = s;
                state = st;
            }
            Err(e) => {
                diag.halted = Some(e.to_string());
                diag.halt_error = Some(e);
                break;
            }
        }
    }
    diag.final_state = Some(state);
    Ok(diag)
}
