//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Upper hemisphere `f = sqrt(r² - |x|²)` with closed-form derivatives.
pub struct Hemisphere {
    pub r: f64,
}

impl Hemisphere {
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.r * self.r - x.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        let f = self.value(x);
        DVector::from_iterator(x.len(), x.iter().map(|v| -v / f))
    }

    pub fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let f = self.value(x);
        let n = x.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            -d / f - x[i] * x[j] / (f * f * f)
        })
    }

    /// λ of the graph with upward normal: `r - n/r`.
    pub fn lambda(&self, n: usize) -> f64 {
        self.r - n as f64 / self.r
    }
}

/// Observed order from errors at `h` and `h/2`.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Fibonacci lattice on the unit sphere in `R³`.
pub fn fibonacci_sphere(count: usize) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            DVector::from_vec(vec![rho * t.cos(), rho * t.sin(), z])
        })
        .collect()
}

fn margin(a: &DVector<f64>, normals: &[DVector<f64>]) -> f64 {
    normals.iter().map(|n| a.dot(n)).fold(f64::INFINITY, f64::min)
}

/// Exhaustive search of `max_{|a|=1} min_i <a, N_i>` in `R³`: a 10⁴-point
/// Fibonacci grid, then a brute-force tangent-plane grid around the best
/// few points, shrinking three times.
pub fn grid_hemisphere_oracle(normals: &[DVector<f64>]) -> f64 {
    let dirs = fibonacci_sphere(10_000);
    let mut scored: Vec<(f64, usize)> = dirs.iter().enumerate().map(|(i, a)| (margin(a, normals), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    for &(_, idx) in scored.iter().take(8) {
        let mut centre = dirs[idx].clone();
        let mut width = 0.04;
        for _ in 0..4 {
            let e1 = if centre[0].abs() < 0.9 { DVector::from_vec(vec![1.0, 0.0, 0.0]) } else { DVector::from_vec(vec![0.0, 1.0, 0.0]) };
            let u = (&e1 - &centre * centre.dot(&e1)).normalize();
            let v = centre.cross(&u);
            let mut local = (margin(&centre, normals), centre.clone());
            for i in -10..=10 {
                for j in -10..=10 {
                    let a = (&centre + &u * (width * i as f64 / 10.0) + &v * (width * j as f64 / 10.0)).normalize();
                    let m = margin(&a, normals);
                    if m > local.0 {
                        local = (m, a);
                    }
                }
            }
            centre = local.1;
            best = best.max(local.0);
            width /= 5.0;
        }
    }
    best
}

/// Tridiagonal solve (Thomas algorithm).
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Damped Picard iteration for the 1-D graphic equation with zero Dirichlet
/// data on `[-R, R]`:
/// `f'' - x f' + f = λ W + f'' f'² / W²` with the right side frozen at the
/// previous iterate. Returns the grid values including both endpoints.
pub fn picard_1d(lambda: f64, radius: f64, h: f64) -> Vec<f64> {
    let m = (2.0 * radius / h).round() as usize + 1;
    let x: Vec<f64> = (0..m).map(|i| -radius + i as f64 * h).collect();
    let n = m - 2;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let xi = x[i + 1];
        lower[i] = 1.0 / (h * h) + xi / (2.0 * h);
        diag[i] = 1.0 - 2.0 / (h * h);
        upper[i] = 1.0 / (h * h) - xi / (2.0 * h);
    }
    let mut f = vec![0.0; m];
    for _ in 0..20_000 {
        let rhs: Vec<f64> = (1..m - 1)
            .map(|i| {
                let p = (f[i + 1] - f[i - 1]) / (2.0 * h);
                let q = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
                lambda * (1.0 + p * p).sqrt() + q * p * p / (1.0 + p * p)
            })
            .collect();
        let new = thomas(&lower, &diag, &upper, &rhs);
        let mut change = 0.0f64;
        for i in 0..n {
            change = change.max((new[i] - f[i + 1]).abs());
            f[i + 1] = 0.5 * f[i + 1] + 0.5 * new[i];
        }
        if change < 1e-13 {
            return f;
        }
    }
    panic!("Picard oracle did not converge");
}

/// Classical RK4 shooting for `f'' = (1 + f'²)(-f + x f' + λ W)` from
/// `x = -R` with `f = 0`, `f' = s`. Returns `f(R)` or `None` when the graph
/// turns vertical before reaching `R`.
pub fn shoot_1d(lambda: f64, radius: f64, slope: f64, steps: usize) -> Option<f64> {
    let rhs = |x: f64, f: f64, p: f64| (1.0 + p * p) * (-f + x * p + lambda * (1.0 + p * p).sqrt());
    let h = 2.0 * radius / steps as f64;
    let (mut x, mut f, mut p) = (-radius, 0.0, slope);
    for _ in 0..steps {
        let (k1f, k1p) = (p, rhs(x, f, p));
        let (k2f, k2p) = (p + 0.5 * h * k1p, rhs(x + 0.5 * h, f + 0.5 * h * k1f, p + 0.5 * h * k1p));
        let (k3f, k3p) = (p + 0.5 * h * k2p, rhs(x + 0.5 * h, f + 0.5 * h * k2f, p + 0.5 * h * k2p));
        let (k4f, k4p) = (p + h * k3p, rhs(x + h, f + h * k3f, p + h * k3p));
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        x += h;
        if !(f.is_finite() && p.is_finite()) || p.abs() > 1e4 {
            return None;
        }
    }
    Some(f)
}
