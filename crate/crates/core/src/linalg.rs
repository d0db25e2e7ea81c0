//! Least-squares kernels.
//!
//! [`fit_ols`] solves a stacked design directly with a column-pivoted
//! Householder QR. [`Factor`] keeps the triangular factor of `[X | y]` for a
//! set of observations; factors of disjoint observation sets merge by Givens
//! rotations, which is how cluster costs are priced without restacking rows.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Columns whose pivoted diagonal falls below this fraction of the largest
/// diagonal are treated as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Unpivoted factors with a diagonal ratio below this take the pivoted path.
const FAST_PATH_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub sse: f64,
    pub rank: usize,
}

/// Ordinary least squares of `y` on the row-major `rows x cols` design `x`.
///
/// Rank-deficient designs get the minimum-norm minimizer.
pub fn fit_ols(x: &[f64], rows: usize, cols: usize, y: &[f64]) -> Result<FitResult> {
    if rows == 0 || cols == 0 {
        return contract("least squares needs at least one row and one column");
    }
    if x.len() != rows * cols {
        return contract(format!("design has {} values, expected {rows}x{cols}", x.len()));
    }
    if y.len() != rows {
        return contract(format!("response has {} values, design has {rows} rows", y.len()));
    }
    let mut a = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            a[c * rows + r] = x[r * cols + c];
        }
    }
    let mut b = y.to_vec();
    let (beta, rank, _) = lstsq_min_norm(&mut a, rows, cols, &mut b);
    let mut sse = 0.0;
    for r in 0..rows {
        let pred: f64 = x[r * cols..(r + 1) * cols].iter().zip(&beta).map(|(u, v)| u * v).sum();
        let e = y[r] - pred;
        sse += e * e;
    }
    Ok(FitResult { beta, sse, rank })
}

/// Householder reflector for `x`, returned as `(v, tau, beta)` with `v[0] = 1`
/// so that `(I - tau v v^T) x = beta e_1`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let alpha = x[0];
    let tail: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if tail == 0.0 {
        return (v, 0.0, alpha);
    }
    let norm = (alpha * alpha + tail).sqrt();
    let beta = if alpha > 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for e in v[1..].iter_mut() {
        *e *= scale;
    }
    (v, tau, beta)
}

fn apply_reflector(v: &[f64], tau: f64, target: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let s: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
    let s = tau * s;
    for (t, vi) in target.iter_mut().zip(v) {
        *t -= s * vi;
    }
}

/// Minimum-norm least squares on a column-major `m x n` matrix. Overwrites
/// `a` and `b`; returns the coefficients, the numerical rank and the squared
/// residual implied by the factorization.
pub(crate) fn lstsq_min_norm(a: &mut [f64], m: usize, n: usize, b: &mut [f64]) -> (Vec<f64>, usize, f64) {
    let steps = m.min(n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut diag = Vec::with_capacity(steps);
    let col = |c: usize| c * m;

    for k in 0..steps {
        let mut best = k;
        let mut best_norm = -1.0;
        for c in k..n {
            let norm: f64 = a[col(c) + k..col(c) + m].iter().map(|v| v * v).sum();
            if norm > best_norm {
                best_norm = norm;
                best = c;
            }
        }
        if best != k {
            for r in 0..m {
                a.swap(col(k) + r, col(best) + r);
            }
            perm.swap(k, best);
        }
        let (v, tau, beta) = householder(&a[col(k) + k..col(k) + m]);
        for c in k + 1..n {
            apply_reflector(&v, tau, &mut a[col(c) + k..col(c) + m]);
        }
        apply_reflector(&v, tau, &mut b[k..m]);
        a[col(k) + k] = beta;
        for r in k + 1..m {
            a[col(k) + r] = 0.0;
        }
        diag.push(beta);
    }

    let lead = diag.first().map(|d| d.abs()).unwrap_or(0.0);
    let rank = if lead == 0.0 {
        0
    } else {
        diag.iter().take_while(|d| d.abs() > RANK_TOLERANCE * lead).count()
    };
    let residual: f64 = b[rank..m].iter().map(|v| v * v).sum();

    let mut z = vec![0.0; n];
    if rank == n {
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..n {
                s -= a[col(c) + k] * z[c];
            }
            z[k] = s / a[col(k) + k];
        }
    } else if rank > 0 {
        // T = [R11 R12] is rank x n. Factor T^T = W U and solve U^T w = c,
        // then z = W [w; 0] is the minimum-norm solution of T z = c.
        let mut tt = vec![0.0; n * rank];
        for i in 0..rank {
            for c in i..n {
                tt[i * n + c] = a[col(c) + i];
            }
        }
        let mut reflectors = Vec::with_capacity(rank);
        let mut u = vec![0.0; rank * rank];
        for k in 0..rank {
            let (v, tau, beta) = householder(&tt[k * n + k..k * n + n]);
            for c in k + 1..rank {
                apply_reflector(&v, tau, &mut tt[c * n + k..c * n + n]);
            }
            u[k * rank + k] = beta;
            for c in k + 1..rank {
                u[c * rank + k] = tt[c * n + k];
            }
            reflectors.push((v, tau));
        }
        let mut w = vec![0.0; n];
        for k in 0..rank {
            let mut s = b[k];
            for i in 0..k {
                s -= u[k * rank + i] * w[i];
            }
            w[k] = s / u[k * rank + k];
        }
        for (k, (v, tau)) in reflectors.iter().enumerate().rev() {
            apply_reflector(v, *tau, &mut w[k..n]);
        }
        z = w;
    }

    let mut beta = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        beta[p] = z[k];
    }
    (beta, rank, residual)
}

/// Upper-triangular factor `R` of the augmented matrix `[X | y]` for some
/// set of observations, so that `||X b - y||^2 = ||R [b; -1]||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    p: usize,
    r: Vec<f64>,
}

impl Factor {
    /// Factor of zero observations for `j` predictors.
    pub fn empty(j: usize) -> Self {
        let p = j + 1;
        Self { p, r: vec![0.0; p * p] }
    }

    /// Factor of a row-major `rows x j` design with responses `y`.
    pub fn from_observations(x: &[f64], y: &[f64], j: usize) -> Self {
        let mut f = Self::empty(j);
        let mut row = vec![0.0; j + 1];
        for (l, &yl) in y.iter().enumerate() {
            row[..j].copy_from_slice(&x[l * j..(l + 1) * j]);
            row[j] = yl;
            f.absorb_row(&mut row, 0);
        }
        f
    }

    pub fn num_predictors(&self) -> usize {
        self.p - 1
    }

    /// Rotates one augmented observation row into the factor. Entries of
    /// `row` before `start` must be zero.
    pub fn absorb_row(&mut self, row: &mut [f64], start: usize) {
        let p = self.p;
        for c in start..p {
            let b = row[c];
            if b == 0.0 {
                continue;
            }
            let a = self.r[c * p + c];
            let h = a.hypot(b);
            let (cs, sn) = (a / h, b / h);
            let rr = &mut self.r[c * p..(c + 1) * p];
            for col in c..p {
                let t1 = rr[col];
                let t2 = row[col];
                rr[col] = cs * t1 + sn * t2;
                row[col] = cs * t2 - sn * t1;
            }
            row[c] = 0.0;
        }
    }

    /// Adds the observations summarized by `other`.
    pub fn merge(&mut self, other: &Factor) {
        debug_assert_eq!(self.p, other.p);
        let p = self.p;
        let mut row = vec![0.0; p];
        for i in 0..p {
            let src = &other.r[i * p..(i + 1) * p];
            if src[i..].iter().all(|&v| v == 0.0) {
                continue;
            }
            row.copy_from_slice(src);
            self.absorb_row(&mut row, i);
        }
    }

    pub fn merged(&self, other: &Factor) -> Factor {
        let mut f = self.clone();
        f.merge(other);
        f
    }

    fn well_conditioned(&self) -> bool {
        let j = self.p - 1;
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for c in 0..j {
            let d = self.r[c * self.p + c].abs();
            max = max.max(d);
            min = min.min(d);
        }
        max > 0.0 && min > FAST_PATH_RATIO * max
    }

    /// Residual sum of squares of the least-squares fit.
    pub fn sse(&self) -> f64 {
        if self.well_conditioned() {
            let rho = self.r[self.p * self.p - 1];
            rho * rho
        } else {
            self.fit().sse
        }
    }

    /// Least-squares fit over the summarized observations.
    pub fn fit(&self) -> FitResult {
        let p = self.p;
        let j = p - 1;
        let rho = self.r[p * p - 1];
        if self.well_conditioned() {
            let mut beta = vec![0.0; j];
            for k in (0..j).rev() {
                let mut s = self.r[k * p + j];
                for c in k + 1..j {
                    s -= self.r[k * p + c] * beta[c];
                }
                beta[k] = s / self.r[k * p + k];
            }
            return FitResult { beta, sse: rho * rho, rank: j };
        }
        let mut a = vec![0.0; j * j];
        let mut b = vec![0.0; j];
        for r in 0..j {
            for c in r..j {
                a[c * j + r] = self.r[r * p + c];
            }
            b[r] = self.r[r * p + j];
        }
        let (beta, rank, residual) = lstsq_min_norm(&mut a, j, j, &mut b);
        FitResult { beta, sse: residual + rho * rho, rank }
    }
}
