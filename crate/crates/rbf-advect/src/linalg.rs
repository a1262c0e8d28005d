//! Dense linear algebra for the small systems assembled elsewhere.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Relative pivot size below which a factorization is flagged singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds the matrix row by row, rows possibly computed in parallel.
    pub fn from_row_fn<F>(exec: Execution, rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let mut data = vec![0.0; rows * cols];
        par::for_each_row(exec, &mut data, cols, f);
        Self { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| c * v).collect() }
    }

    /// Copies rows `r0..r1` into a new matrix.
    pub fn row_block(&self, r0: usize, r1: usize) -> Self {
        Self {
            rows: r1 - r0,
            cols: self.cols,
            data: self.data[r0 * self.cols..r1 * self.cols].to_vec(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = self * x` without allocating.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec: vector length");
        assert_eq!(y.len(), self.rows, "matvec: output length");
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *yi = dot(row, x);
        }
    }

    /// `xᵀ * self`.
    pub fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "vecmat: vector length");
        let mut y = vec![0.0; self.cols];
        for (xi, row) in x.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += xi * a;
            }
        }
        y
    }

    pub fn matmul(&self, other: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.cols;
        Ok(Self::from_row_fn(exec, self.rows, n, |i, out| {
            for (k, a) in self.row(i).iter().enumerate() {
                if *a != 0.0 {
                    for (o, b) in out.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        }))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// LU factorization with partial pivoting, `PA = LU`.
#[derive(Clone, Debug)]
pub struct LuFactorization {
    factors: DenseMatrix,
    perm: Vec<usize>,
    singular: bool,
    min_pivot_ratio: f64,
}

impl LuFactorization {
    pub fn factors(&self) -> &DenseMatrix {
        &self.factors
    }

    /// `perm[i]` is the original row that ends up in row `i`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Smallest |pivot| divided by the largest |entry| of the input.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }
}

pub fn lu_factor(m: &DenseMatrix) -> Result<LuFactorization> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("LU of a {}x{} matrix", m.rows, m.cols)));
    }
    let n = m.rows;
    let scale = m.max_abs();
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut singular = scale == 0.0;
    let mut min_ratio = f64::INFINITY;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if scale > 0.0 {
            min_ratio = min_ratio.min(pmax / scale);
        }
        if pmax < SINGULAR_PIVOT_TOL * scale || pmax == 0.0 {
            singular = true;
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                a.data.swap(p * n + j, k * n + j);
            }
        }
        let piv = a[(k, k)];
        if piv == 0.0 {
            continue;
        }
        for i in k + 1..n {
            let l = a[(i, k)] / piv;
            a[(i, k)] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    a.data[i * n + j] -= l * a.data[k * n + j];
                }
            }
        }
    }
    if n == 0 {
        min_ratio = 0.0;
    }
    Ok(LuFactorization { factors: a, perm, singular, min_pivot_ratio: min_ratio })
}

fn singular_error(f: &LuFactorization) -> Error {
    Error::Singular(format!(
        "factorization of a {n}x{n} matrix is singular (min pivot ratio {:.2e})",
        f.min_pivot_ratio,
        n = f.dim()
    ))
}

pub fn solve(f: &LuFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    if f.singular {
        return Err(singular_error(f));
    }
    solve_unchecked(f, rhs)
}

/// Forward/back substitution ignoring the singular flag.
///
/// Used when the caller knows the system is consistent but numerically
/// rank deficient and wants whatever solution the pivots produce.
pub fn solve_unchecked(f: &LuFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    if rhs.len() != n {
        return Err(Error::Dimension(format!("rhs length {} for a {n}x{n} system", rhs.len())));
    }
    let a = &f.factors;
    let mut x: Vec<f64> = f.perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        let s = dot(&a.row(i)[..i], &x[..i]);
        x[i] -= s;
    }
    for i in (0..n).rev() {
        let s = dot(&a.row(i)[i + 1..], &x[i + 1..]);
        x[i] = (x[i] - s) / a[(i, i)];
    }
    Ok(x)
}

/// Solves for every column of `rhs`; returns the solutions as columns.
pub fn solve_many(f: &LuFactorization, rhs: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
    if f.singular {
        return Err(singular_error(f));
    }
    if rhs.rows != f.dim() {
        return Err(Error::Dimension(format!("rhs has {} rows, system {}", rhs.rows, f.dim())));
    }
    let cols = par::map_range(exec, rhs.cols, |j| solve_unchecked(f, &rhs.column(j)));
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DenseMatrix::from_fn(rhs.rows, rhs.cols, |i, j| cols[j][i]))
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, `s` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided Jacobi SVD. Accurate for the small dense matrices used here.
pub fn svd(m: &DenseMatrix) -> Svd {
    if m.rows < m.cols {
        let t = svd(&m.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (rows, n) = (m.rows, m.cols);
    // Work on columns stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| f64::from(u8::from(i == j))).collect()).collect();
    let eps = f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> =
        cols.iter().enumerate().map(|(j, c)| (dot(c, c).sqrt(), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let s: Vec<f64> = order.iter().map(|o| o.0).collect();
    let u = DenseMatrix::from_fn(rows, n, |i, k| {
        let (sk, j) = order[k];
        if sk > 0.0 { cols[j][i] / sk } else { 0.0 }
    });
    let vm = DenseMatrix::from_fn(n, n, |i, k| v[order[k].1][i]);
    Svd { u, s, v: vm }
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    svd(m).s
}

/// σ_max / σ_min from the full spectrum; `+inf` if σ_min underflows.
pub fn condition_number(m: &DenseMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("condition number of a {}x{} matrix", m.rows, m.cols)));
    }
    let s = singular_values(m);
    let (smax, smin) = (s[0], s[s.len() - 1]);
    if smax == 0.0 {
        return Err(Error::Domain("condition number of the zero matrix".into()));
    }
    let c = smax / smin;
    Ok(if smin == 0.0 || !c.is_finite() { f64::INFINITY } else { c })
}

/// Numerical rank with threshold `rel_tol * σ_max`.
pub fn rank(m: &DenseMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count()
}

/// Minimum-norm least-squares solve discarding singular values below
/// `rel_tol * σ_max`.
pub fn tsvd_solve(m: &DenseMatrix, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    if rhs.len() != m.rows {
        return Err(Error::Dimension(format!("rhs length {} for {} rows", rhs.len(), m.rows)));
    }
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let utb = d.u.vecmat(rhs);
    let mut x = vec![0.0; m.cols];
    for (k, (&sk, c)) in d.s.iter().zip(utb).enumerate() {
        if sk > rel_tol * smax && sk > 0.0 {
            let w = c / sk;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += w * d.v[(i, k)];
            }
        }
    }
    Ok(x)
}
