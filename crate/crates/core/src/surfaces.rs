//! The canonical λ-hypersurfaces (hyperplanes, round spheres, generalized
//! cylinders) and graph patches of them.
//!
//! Orientation matters: flipping `N` negates both `H` and `<X, N>`, hence λ.
//! With the inward normal a sphere of radius `r` in `R^{n+1}` has `H = n/r`,
//! `<X, N> = -r` and `λ = n/r - r`; the cylinder `S^k(r) x R^{n-k}` has
//! `λ = k/r - r`. Graph patches use the upward normal, which on the upper
//! hemisphere is the outward one, so their λ is `r - n/r`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GradHess;

/// Half-width of the box from which free (flat) coordinates are sampled.
pub const SAMPLE_EXTENT: f64 = 4.0;

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// Largest ambient dimension the sampler supports.
pub const MAX_AMBIENT_DIM: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("cylinder needs 1 <= k <= n-1, got k={k}, n={n}")]
    BadCylinderFactor { k: usize, n: usize },
    #[error("plane normal must be a unit vector (|a| = {0})")]
    NonUnitNormal(f64),
    #[error("surface dimension must satisfy 1 <= n <= {max}, got {n}", max = MAX_AMBIENT_DIM - 1)]
    BadDimension { n: usize },
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("point {0:?} outside the graph patch")]
    OutsidePatch(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Inward,
    Outward,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Inward => 1.0,
            Orientation::Outward => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Inward => Orientation::Outward,
            Orientation::Outward => Orientation::Inward,
        }
    }
}

/// Canonical λ-hypersurface of `R^{n+1}`. The plane `{<X, a> = d}` is
/// oriented by `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CanonicalSurface {
    Plane {
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Sphere {
        n: usize,
        r: f64,
        #[serde(default)]
        orientation: Orientation,
    },
    Cylinder {
        n: usize,
        k: usize,
        r: f64,
        #[serde(default)]
        orientation: Orientation,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub position: DVector<f64>,
    pub normal: DVector<f64>,
    pub mean_curvature: f64,
    pub support: f64,
}

impl CanonicalSurface {
    pub fn sphere(n: usize, r: f64, orientation: Orientation) -> Self {
        CanonicalSurface::Sphere { n, r, orientation }
    }

    pub fn cylinder(n: usize, k: usize, r: f64, orientation: Orientation) -> Self {
        CanonicalSurface::Cylinder { n, k, r, orientation }
    }

    pub fn plane(normal: Vec<f64>, offset: f64) -> Self {
        CanonicalSurface::Plane { normal, offset }
    }

    /// Horizontal hyperplane `x_{n+1} = d` in `R^{n+1}` with upward normal.
    pub fn horizontal_plane(n: usize, offset: f64) -> Self {
        let mut normal = vec![0.0; n + 1];
        normal[n] = 1.0;
        CanonicalSurface::Plane { normal, offset }
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        let check_n = |n: usize| {
            if n == 0 || n + 1 > MAX_AMBIENT_DIM {
                Err(SurfaceError::BadDimension { n })
            } else {
                Ok(())
            }
        };
        let check_r = |r: f64| {
            if r.is_finite() && r > 0.0 {
                Ok(())
            } else {
                Err(SurfaceError::BadRadius(r))
            }
        };
        match self {
            CanonicalSurface::Plane { normal, offset } => {
                check_n(normal.len().saturating_sub(1))?;
                let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !((len - 1.0).abs() <= 1e-9) || !offset.is_finite() {
                    return Err(SurfaceError::NonUnitNormal(len));
                }
                Ok(())
            }
            CanonicalSurface::Sphere { n, r, .. } => {
                check_n(*n)?;
                check_r(*r)
            }
            CanonicalSurface::Cylinder { n, k, r, .. } => {
                check_n(*n)?;
                check_r(*r)?;
                if *k < 1 || *k >= *n {
                    return Err(SurfaceError::BadCylinderFactor { k: *k, n: *n });
                }
                Ok(())
            }
        }
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        match self {
            CanonicalSurface::Plane { normal, .. } => normal.len().saturating_sub(1),
            CanonicalSurface::Sphere { n, .. } | CanonicalSurface::Cylinder { n, .. } => *n,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim() + 1
    }

    /// Same point set with the opposite unit normal.
    pub fn flipped(&self) -> Self {
        match self.clone() {
            CanonicalSurface::Plane { normal, offset } => CanonicalSurface::Plane {
                normal: normal.iter().map(|v| -v).collect(),
                offset: -offset,
            },
            CanonicalSurface::Sphere { n, r, orientation } => {
                CanonicalSurface::Sphere { n, r, orientation: orientation.flipped() }
            }
            CanonicalSurface::Cylinder { n, k, r, orientation } => {
                CanonicalSurface::Cylinder { n, k, r, orientation: orientation.flipped() }
            }
        }
    }

    /// Constant mean curvature in the surface's own orientation.
    pub fn mean_curvature(&self) -> f64 {
        match self {
            CanonicalSurface::Plane { .. } => 0.0,
            CanonicalSurface::Sphere { n, r, orientation } => orientation.sign() * *n as f64 / r,
            CanonicalSurface::Cylinder { k, r, orientation, .. } => orientation.sign() * *k as f64 / r,
        }
    }

    /// Constant value of `<X, N>`.
    pub fn support(&self) -> f64 {
        match self {
            CanonicalSurface::Plane { offset, .. } => *offset,
            CanonicalSurface::Sphere { r, orientation, .. }
            | CanonicalSurface::Cylinder { r, orientation, .. } => -orientation.sign() * r,
        }
    }

    /// λ such that `<X, N> + H = λ` on the whole surface.
    pub fn canonical_lambda(&self) -> f64 {
        match self {
            CanonicalSurface::Plane { offset, .. } => *offset,
            CanonicalSurface::Sphere { n, r, orientation } => orientation.sign() * (*n as f64 / r - r),
            CanonicalSurface::Cylinder { k, r, orientation, .. } => {
                orientation.sign() * (*k as f64 / r - r)
            }
        }
    }

    /// Deterministic quasi-uniform samples (rotated Halton points). Positions
    /// and normals are generated geometrically and `support` is recomputed as
    /// `<X, N>` from them.
    pub fn sample_surface(&self, count: usize, seed: u64) -> Result<Vec<SurfaceSample>, SurfaceError> {
        self.validate()?;
        if count == 0 {
            return Err(SurfaceError::EmptySample);
        }
        let ambient = self.ambient_dim();
        let h = self.mean_curvature();
        let mut samples = Vec::with_capacity(count);
        match self {
            CanonicalSurface::Plane { normal, offset } => {
                let a = DVector::from_column_slice(normal);
                let basis = orthonormal_complement(&a);
                let mut q = QuasiSequence::new(basis.len(), seed);
                for _ in 0..count {
                    let u = q.next_point();
                    let mut x = &a * *offset;
                    for (b, ui) in basis.iter().zip(&u) {
                        x += b * (SAMPLE_EXTENT * (2.0 * ui - 1.0));
                    }
                    samples.push(make_sample(x, a.clone(), h));
                }
            }
            CanonicalSurface::Sphere { n, r, orientation } => {
                let mut q = QuasiSequence::new(gaussian_dims(n + 1), seed);
                for _ in 0..count {
                    let dir = q.next_direction(n + 1);
                    let x = &dir * *r;
                    let normal = &dir * (-orientation.sign());
                    samples.push(make_sample(x, normal, h));
                }
            }
            CanonicalSurface::Cylinder { n, k, r, orientation } => {
                let flat = n - k;
                let mut q = QuasiSequence::new(gaussian_dims(k + 1) + flat, seed);
                for _ in 0..count {
                    let dir = q.next_direction(k + 1);
                    let u = q.take(flat);
                    let mut x = DVector::zeros(ambient);
                    let mut normal = DVector::zeros(ambient);
                    for i in 0..=*k {
                        x[i] = r * dir[i];
                        normal[i] = -orientation.sign() * dir[i];
                    }
                    for (j, uj) in u.iter().enumerate() {
                        x[k + 1 + j] = SAMPLE_EXTENT * (2.0 * uj - 1.0);
                    }
                    samples.push(make_sample(x, normal, h));
                }
            }
        }
        Ok(samples)
    }

    /// Max over samples of `|<X, N> + H - λ|`.
    pub fn verify_canonical(&self, count: usize) -> Result<f64, SurfaceError> {
        let lambda = self.canonical_lambda();
        Ok(self
            .sample_surface(count, 0)?
            .iter()
            .map(|s| (s.support + s.mean_curvature - lambda).abs())
            .fold(0.0, f64::max))
    }
}

fn make_sample(position: DVector<f64>, normal: DVector<f64>, mean_curvature: f64) -> SurfaceSample {
    let support = position.dot(&normal);
    SurfaceSample { position, normal, mean_curvature, support }
}

fn gaussian_dims(d: usize) -> usize {
    d.div_ceil(2) * 2
}

/// Orthonormal basis of the complement of a unit vector (Gram-Schmidt
/// against the coordinate axes).
pub fn orthonormal_complement(a: &DVector<f64>) -> Vec<DVector<f64>> {
    let d = a.len();
    let mut basis: Vec<DVector<f64>> = vec![a.normalize()];
    for i in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let len = v.norm();
        if len > 1e-8 {
            basis.push(v / len);
        }
    }
    basis.remove(0);
    basis
}

/// Halton sequence with a seeded Cranley-Patterson rotation.
struct QuasiSequence {
    shift: Vec<f64>,
    index: u64,
    cursor: usize,
    current: Vec<f64>,
}

impl QuasiSequence {
    fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "quasi sequence supports at most {} dims", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.random::<f64>()).collect();
        Self { shift, index: 0, cursor: dims, current: vec![0.0; dims] }
    }

    fn advance(&mut self) {
        self.index += 1;
        for (d, slot) in self.current.iter_mut().enumerate() {
            let v = radical_inverse(self.index, PRIMES[d]) + self.shift[d];
            *slot = v - v.floor();
        }
        self.cursor = 0;
    }

    fn next_point(&mut self) -> Vec<f64> {
        self.advance();
        self.current.clone()
    }

    fn take(&mut self, k: usize) -> Vec<f64> {
        let out = self.current[self.cursor..self.cursor + k].to_vec();
        self.cursor += k;
        out
    }

    /// Next point mapped to a unit vector in `R^d` (Box-Muller then
    /// normalisation). Remaining coordinates are left for [`take`].
    fn next_direction(&mut self, d: usize) -> DVector<f64> {
        self.advance();
        loop {
            let pairs = d.div_ceil(2);
            let mut g = Vec::with_capacity(2 * pairs);
            for p in 0..pairs {
                let u1 = self.current[2 * p].max(1e-300);
                let u2 = self.current[2 * p + 1];
                let rad = (-2.0 * u1.ln()).sqrt();
                let ang = std::f64::consts::TAU * u2;
                g.push(rad * ang.cos());
                g.push(rad * ang.sin());
            }
            let v = DVector::from_iterator(d, g.into_iter().take(d));
            let len = v.norm();
            if len > 1e-12 {
                self.cursor = 2 * pairs;
                return v / len;
            }
            self.advance();
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Graph patches with closed-form derivatives, used as analytic solutions of
/// the graphic λ-equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CanonicalGraph {
    /// `f(x) = slope . x + offset`.
    Affine {
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// Upper hemisphere `f(x) = sqrt(r^2 - |x|^2)` over `|x| < r`.
    Hemisphere { n: usize, r: f64 },
    /// Upper half of the cylinder `S^1(r) x R^{n-1}`: `f(x) = sqrt(r^2 - x_1^2)`.
    Cylinder { n: usize, r: f64 },
}

impl CanonicalGraph {
    pub fn dim(&self) -> usize {
        match self {
            CanonicalGraph::Affine { slope, .. } => slope.len(),
            CanonicalGraph::Hemisphere { n, .. } | CanonicalGraph::Cylinder { n, .. } => *n,
        }
    }

    /// λ of the graph under the upward orientation.
    pub fn lambda(&self) -> f64 {
        match self {
            CanonicalGraph::Affine { slope, offset } => {
                offset / (1.0 + slope.iter().map(|s| s * s).sum::<f64>()).sqrt()
            }
            CanonicalGraph::Hemisphere { n, r } => r - *n as f64 / r,
            CanonicalGraph::Cylinder { r, .. } => r - 1.0 / r,
        }
    }

    /// The canonical surface this patch lies on.
    pub fn surface(&self) -> CanonicalSurface {
        match self {
            CanonicalGraph::Affine { slope, offset } => {
                let w = (1.0 + slope.iter().map(|s| s * s).sum::<f64>()).sqrt();
                let mut normal: Vec<f64> = slope.iter().map(|s| -s / w).collect();
                normal.push(1.0 / w);
                CanonicalSurface::Plane { normal, offset: offset / w }
            }
            CanonicalGraph::Hemisphere { n, r } => CanonicalSurface::sphere(*n, *r, Orientation::Outward),
            CanonicalGraph::Cylinder { n, r } => CanonicalSurface::cylinder(*n, 1, *r, Orientation::Outward),
        }
    }

    fn radial(&self, x: &[f64]) -> Option<(f64, f64)> {
        match self {
            CanonicalGraph::Affine { .. } => None,
            CanonicalGraph::Hemisphere { r, .. } => Some((*r, x.iter().map(|v| v * v).sum())),
            CanonicalGraph::Cylinder { r, .. } => Some((*r, x[0] * x[0])),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self.radial(x) {
            None => true,
            Some((r, s)) => s < r * r,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            CanonicalGraph::Affine { slope, offset } => {
                slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            _ => {
                let (r, s) = self.radial(x).unwrap();
                (r * r - s).sqrt()
            }
        }
    }

    pub fn grad_hess(&self, x: &[f64]) -> Result<GradHess, SurfaceError> {
        let n = x.len();
        if !self.contains(x) {
            return Err(SurfaceError::OutsidePatch(x.to_vec()));
        }
        let out = match self {
            CanonicalGraph::Affine { slope, .. } => {
                GradHess::symmetrized(DVector::from_column_slice(slope), DMatrix::zeros(n, n))
            }
            CanonicalGraph::Hemisphere { .. } => {
                let f = self.value(x);
                let xv = DVector::from_column_slice(x);
                let grad = &xv * (-1.0 / f);
                let hess = DMatrix::identity(n, n) * (-1.0 / f) - &xv * xv.transpose() / f.powi(3);
                GradHess::symmetrized(grad, hess)
            }
            CanonicalGraph::Cylinder { r, .. } => {
                let f = self.value(x);
                let mut grad = DVector::zeros(n);
                let mut hess = DMatrix::zeros(n, n);
                grad[0] = -x[0] / f;
                hess[(0, 0)] = -r * r / f.powi(3);
                GradHess::symmetrized(grad, hess)
            }
        };
        Ok(out)
    }
}
