//! Small sparse toolkit for the Newton solves: CSR storage, a banded LU with
//! partial pivoting and restarted GMRES with Jacobi preconditioning.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("zero pivot in column {0}")]
    SingularPivot(usize),
    #[error("gmres stalled at relative residual {0:e}")]
    GmresStalled(f64),
    #[error("non-finite value in linear solve")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(0.0, |(_, v)| v))
            .collect()
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    /// Copy with every diagonal entry scaled by `1 + shift`.
    pub fn with_scaled_diagonal(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.n {
            for k in out.indptr[r]..out.indptr[r + 1] {
                if out.indices[k] == r {
                    out.values[k] *= 1.0 + shift;
                }
            }
        }
        out
    }
}

/// LU factorisation of a banded matrix with row pivoting. Pivoting widens the
/// upper band to `ku + kl`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    // row i holds columns i-kl ..= i+kl+ku at offset (j + kl - i)
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, LinearSolveError> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, width, band: vec![0.0; n * width], pivots: vec![0; n] };
        for r in 0..n {
            for (c, v) in a.row(r) {
                *lu.at(r, c) = v;
            }
        }
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = lu.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !best.is_finite() {
                return Err(LinearSolveError::NonFinite);
            }
            if best <= f64::EPSILON * scale * 1e-3 || best == 0.0 {
                return Err(LinearSolveError::SingularPivot(k));
            }
            lu.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let a = lu.get(k, c);
                    let b = lu.get(p, c);
                    *lu.at(k, c) = b;
                    *lu.at(p, c) = a;
                }
            }
            let pivot = lu.get(k, k);
            for r in k + 1..=last_row {
                let m = lu.get(r, k) / pivot;
                if m == 0.0 {
                    continue;
                }
                *lu.at(r, k) = m;
                for c in k + 1..=last_col {
                    let u = lu.get(k, c);
                    if u != 0.0 {
                        *lu.at(r, c) -= m * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c + self.kl - r < self.width);
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c + self.kl - r >= self.width {
            0.0
        } else {
            self.band[self.slot(r, c)]
        }
    }

    #[inline]
    fn at(&mut self, r: usize, c: usize) -> &mut f64 {
        let s = self.slot(r, c);
        &mut self.band[s]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        // forward: apply P and L
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let last_row = (k + self.kl).min(n - 1);
            for r in k + 1..=last_row {
                let m = self.get(r, k);
                if m != 0.0 {
                    x[r] -= m * x[k];
                }
            }
        }
        let reach = self.width - self.kl - 1;
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                s -= self.get(k, c) * x[c];
            }
            x[k] = s / self.get(k, k);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Right-preconditioned restarted GMRES with `M = diag(A)`. Starts from
/// `x` and stops once `|b - A x| <= rtol |b|`.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome, LinearSolveError> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresOutcome { iterations: 0, relative_residual: 0.0 });
    }
    let mut total = 0;
    loop {
        let ax = a.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(LinearSolveError::NonFinite);
        }
        if rel <= rtol {
            return Ok(GmresOutcome { iterations: total, relative_residual: rel });
        }
        if total >= max_iter {
            return Err(LinearSolveError::GmresStalled(rel));
        }

        let m = restart.min(n).max(1);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let z: Vec<f64> = basis[k].iter().zip(&inv_diag).map(|(v, d)| v * d).collect();
            let mut w = a.matvec(&z);
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                hess[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hjk * vi);
            }
            let wnorm = norm(&w);
            hess[k + 1][k] = wnorm;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = (hess[k][k] * hess[k][k] + hess[k + 1][k] * hess[k + 1][k]).sqrt();
            if denom == 0.0 {
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() / bnorm <= rtol || wnorm == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }
        if k_used == 0 {
            return Err(LinearSolveError::GmresStalled(rel));
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for ((xi, vi), di) in x.iter_mut().zip(&basis[j]).zip(&inv_diag) {
                *xi += yj * vi * di;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
