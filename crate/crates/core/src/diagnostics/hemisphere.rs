//! Is a set of unit normals contained in an open or closed hemisphere?
//!
//! Both questions reduce to `v* = max_{|a| = 1} min_i <a, N_i>`: open iff
//! `v* > 0`, closed iff `v* >= 0`. The maximiser is found by projected
//! supergradient ascent from several starts, then polished by enumerating
//! small active sets (equal-value and null-space directions).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::DiagnosticsError;

pub const DEFAULT_TOL: f64 = 1e-6;
const UNIT_TOL: f64 = 1e-9;
const ASCENT_ITERS: usize = 400;
const RANDOM_STARTS: usize = 16;
const MAX_NORMAL_STARTS: usize = 32;
const START_SEED: u64 = 0x4845_4d49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Open,
    ClosedOnly,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HemisphereCertificate {
    pub direction: Vec<f64>,
    /// `min_i <a, N_i>`, rechecked directly on the input.
    pub margin: f64,
    pub verdict: Verdict,
    pub tol: f64,
}

impl HemisphereCertificate {
    pub fn is_open(&self) -> bool {
        self.verdict == Verdict::Open
    }

    pub fn is_closed(&self) -> bool {
        self.verdict != Verdict::Neither
    }
}

fn validate(normals: &[DVector<f64>]) -> Result<usize, DiagnosticsError> {
    let first = normals.first().ok_or(DiagnosticsError::NoNormals)?;
    let d = first.len();
    for (index, nrm) in normals.iter().enumerate() {
        if nrm.len() != d || d == 0 {
            return Err(DiagnosticsError::DimensionMismatch { index, got: nrm.len(), expected: d.max(1) });
        }
        let norm = nrm.norm();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(DiagnosticsError::NotUnit { index, norm });
        }
    }
    Ok(d)
}

/// `min_i <a, N_i>`.
pub fn hemisphere_margin(a: &DVector<f64>, normals: &[DVector<f64>]) -> f64 {
    normals.iter().map(|n| a.dot(n)).fold(f64::INFINITY, f64::min)
}

/// Standard normal by Box-Muller.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn starts(normals: &[DVector<f64>], d: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    let mean = normals.iter().fold(DVector::zeros(d), |acc, n| acc + n);
    if mean.norm() > 1e-12 {
        out.push(mean.normalize());
    }
    let stride = normals.len().div_ceil(MAX_NORMAL_STARTS);
    out.extend(normals.iter().step_by(stride).cloned());
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(d);
            e[k] = s;
            out.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    for _ in 0..RANDOM_STARTS {
        let v = DVector::from_fn(d, |_, _| gaussian(&mut rng));
        if v.norm() > 1e-12 {
            out.push(v.normalize());
        }
    }
    out
}

fn ascend(mut a: DVector<f64>, normals: &[DVector<f64>]) -> (DVector<f64>, f64) {
    let mut best = (a.clone(), hemisphere_margin(&a, normals));
    for t in 0..ASCENT_ITERS {
        let (imin, _) = normals
            .iter()
            .enumerate()
            .map(|(i, n)| (i, a.dot(n)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let eta = 0.5 / ((t + 1) as f64).sqrt();
        let next = &a + &normals[imin] * eta;
        if next.norm() < 1e-14 {
            break;
        }
        a = next.normalize();
        let v = hemisphere_margin(&a, normals);
        if v > best.1 {
            best = (a.clone(), v);
        }
    }
    best
}

fn k_subsets(k: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, k: usize, max_size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max_size {
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, max_size, cur, out);
            cur.pop();
        }
    }
    rec(0, k, max_size, &mut cur, &mut out);
    out
}

/// Directions that make the selected constraints equal (`±u` with
/// `M u = 1` of minimum norm) plus unit vectors in the null space of `M`.
fn active_set_candidates(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let d = m.ncols();
    let mut out = Vec::new();
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax.max(1.0);
    if let Ok(u) = svd.solve(&DVector::from_element(m.nrows(), 1.0), eps) {
        let residual = (m * &u).add_scalar(-1.0).amax();
        if u.norm() > 1e-12 && residual < 1e-8 {
            let u = u.normalize();
            out.push(-&u);
            out.push(u);
        }
    }
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < d {
        // null space of M from the eigenvectors of M^T M
        let eig = (m.transpose() * m).symmetric_eigen();
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() <= eps * smax.max(1.0) {
                let v = eig.eigenvectors.column(i).into_owned();
                out.push(-&v);
                out.push(v);
            }
        }
    }
    out
}

fn polish(a: &DVector<f64>, normals: &[DVector<f64>], d: usize) -> (DVector<f64>, f64) {
    let mut order: Vec<(usize, f64)> = normals.iter().map(|n| a.dot(n)).enumerate().collect();
    order.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let k = order.len().min(d + 4);
    let mut best = (a.clone(), hemisphere_margin(a, normals));
    for subset in k_subsets(k, d) {
        let m = DMatrix::from_fn(subset.len(), d, |r, c| normals[order[subset[r]].0][c]);
        for cand in active_set_candidates(&m) {
            let v = hemisphere_margin(&cand, normals);
            if v > best.1 {
                best = (cand, v);
            }
        }
    }
    best
}

/// Maximiser of `min_i <a, N_i>` over unit `a`, with its value.
pub fn optimal_hemisphere(normals: &[DVector<f64>]) -> Result<(DVector<f64>, f64), DiagnosticsError> {
    let d = validate(normals)?;
    let results: Vec<(DVector<f64>, f64)> = starts(normals, d).into_par_iter().map(|s| ascend(s, normals)).collect();
    // first best in start order, so the result does not depend on scheduling
    let best = results.into_iter().fold(None::<(DVector<f64>, f64)>, |acc, x| match acc {
        Some(b) if b.1 >= x.1 => Some(b),
        _ => Some(x),
    });
    let (a, _) = best.expect("at least one start");
    let (a, v) = polish(&a, normals, d);
    // a second polish from the improved point picks up a changed active set
    let (a2, v2) = polish(&a, normals, d);
    Ok(if v2 > v { (a2, v2) } else { (a, v) })
}

fn certificate(normals: &[DVector<f64>], tol: f64) -> Result<HemisphereCertificate, DiagnosticsError> {
    let (a, _) = optimal_hemisphere(normals)?;
    let margin = hemisphere_margin(&a, normals);
    let verdict = if margin > tol {
        Verdict::Open
    } else if margin >= -tol {
        Verdict::ClosedOnly
    } else {
        Verdict::Neither
    };
    Ok(HemisphereCertificate { direction: a.iter().copied().collect(), margin, verdict, tol })
}

/// Certificate for containment in an open hemisphere (`verdict == Open`).
pub fn open_hemisphere_certificate(normals: &[DVector<f64>], tol: f64) -> Result<HemisphereCertificate, DiagnosticsError> {
    certificate(normals, tol)
}

/// Certificate for containment in a closed hemisphere (`verdict != Neither`).
pub fn closed_hemisphere_certificate(normals: &[DVector<f64>], tol: f64) -> Result<HemisphereCertificate, DiagnosticsError> {
    certificate(normals, tol)
}

/// Coordinates of the closed half-equator `{x_height = 0, x_half >= 0}`
/// excluded from the Gauss image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct HalfEquator {
    pub height_axis: usize,
    pub half_axis: usize,
}

impl HalfEquator {
    /// Last axis as height, second to last as the half-space axis.
    pub fn standard(ambient_dim: usize) -> Self {
        Self { height_axis: ambient_dim.saturating_sub(1), half_axis: ambient_dim.saturating_sub(2) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub violations: usize,
    /// Indices of offending normals, ascending.
    pub witnesses: Vec<usize>,
    pub eps: f64,
    pub embedding: HalfEquator,
}

/// Flags normals with `|N_height| <= eps` and `N_half >= -eps`.
pub fn theorem2_region_test(
    normals: &[DVector<f64>],
    eps: f64,
    embedding: HalfEquator,
) -> Result<RegionReport, DiagnosticsError> {
    let d = validate(normals)?;
    let HalfEquator { height_axis, half_axis } = embedding;
    if height_axis >= d || half_axis >= d || height_axis == half_axis {
        return Err(DiagnosticsError::BadEmbedding { height: height_axis, half: half_axis, dim: d });
    }
    let witnesses: Vec<usize> = normals
        .iter()
        .enumerate()
        .filter(|(_, n)| n[height_axis].abs() <= eps && n[half_axis] >= -eps)
        .map(|(i, _)| i)
        .collect();
    Ok(RegionReport { violations: witnesses.len(), witnesses, eps, embedding })
}
