//! Dense column-major matrices and a one-sided Jacobi SVD.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Column-major: entry `(i, j)` lives at `i + rows * j`, matching the memory
/// order of a 2-D [`crate::lattice::LatticeSignal`] whose first coordinate
/// is the row.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        let mut data = vec![0.0; r * c];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[i + r * j] = v;
            }
        }
        Matrix::new(r, c, data)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.rows * j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + self.rows * j] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[self.rows * j..self.rows * (j + 1)]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[self.rows * j..self.rows * (j + 1)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other.get(k, j);
                if b == 0.0 {
                    continue;
                }
                let a = self.col(k);
                let o = out.col_mut(j);
                for i in 0..a.len() {
                    o[i] += a[i] * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.col(j)) {
                *o += a * xj;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        compensated_sum(self.data.iter().map(|v| v * v)).sqrt()
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid("matrix shapes differ"));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }
}

/// `a = u * diag(s) * v^T` with `k = min(rows, cols)` columns in `u` and `v`
/// and `s` nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
    pub sweeps: usize,
}

impl Svd {
    /// `sum_{i < rank} s_i u_i v_i^T`.
    pub fn reconstruct(&self, rank: usize) -> Matrix {
        let mut out = Matrix::zeros(self.u.rows(), self.v.rows());
        for t in 0..rank.min(self.s.len()) {
            let s = self.s[t];
            if s == 0.0 {
                continue;
            }
            let u = self.u.col(t);
            for j in 0..self.v.rows() {
                let c = s * self.v.get(j, t);
                if c == 0.0 {
                    continue;
                }
                for (o, &ui) in out.col_mut(j).iter_mut().zip(u) {
                    *o += ui * c;
                }
            }
        }
        out
    }
}

pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi: orthogonalize the columns of `a` by plane
/// rotations, accumulating them in `v`. Wide inputs go through the transpose.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows < a.cols {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
            sweeps: t.sweeps,
        });
    }
    let (m, n) = (a.rows, a.cols);
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    // columns below this are rounding noise left by rank deficiency
    let negligible = {
        let f = a.frobenius_norm() * f64::EPSILON;
        f * f
    };
    let mut sweeps = 0;
    loop {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NonConvergence {
                solver: "jacobi svd",
                iterations: sweeps,
                residual: off_diagonal_ratio(&w),
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (w.col(p), w.col(q));
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for i in 0..m {
                        a += wp[i] * wp[i];
                        b += wq[i] * wq[i];
                        g += wp[i] * wq[i];
                    }
                    (a, b, g)
                };
                if gamma == 0.0
                    || gamma.abs() <= JACOBI_TOLERANCE * (alpha * beta).sqrt()
                    || alpha.min(beta) <= negligible
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.col(j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let tiny = s.first().copied().unwrap_or(0.0) * (m as f64) * f64::EPSILON;

    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut missing = Vec::new();
    for (t, &j) in order.iter().enumerate() {
        vs.col_mut(t).copy_from_slice(v.col(j));
        if norms[j] > tiny && norms[j] > 0.0 {
            for (o, &x) in u.col_mut(t).iter_mut().zip(w.col(j)) {
                *o = x / norms[j];
            }
        } else {
            missing.push(t);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok(Svd { u, s, v: vs, sweeps })
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.rows;
    let (lo, hi) = m.data.split_at_mut(rows * q);
    let cp = &mut lo[rows * p..rows * (p + 1)];
    let cq = &mut hi[..rows];
    for i in 0..rows {
        let (x, y) = (cp[i], cq[i]);
        cp[i] = c * x - s * y;
        cq[i] = s * x + c * y;
    }
}

fn off_diagonal_ratio(w: &Matrix) -> f64 {
    let n = w.cols;
    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            let (wp, wq) = (w.col(p), w.col(q));
            let g: f64 = wp.iter().zip(wq).map(|(a, b)| a * b).sum();
            let a: f64 = wp.iter().map(|x| x * x).sum();
            let b: f64 = wq.iter().map(|x| x * x).sum();
            if a > 0.0 && b > 0.0 {
                worst = worst.max(g.abs() / (a * b).sqrt());
            }
        }
    }
    worst
}

/// Fill the listed columns of `u` with unit vectors orthogonal to every other
/// column, by Gram-Schmidt on the standard basis.
fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    let m = u.rows;
    let mut candidate = 0;
    for &t in missing {
        loop {
            assert!(candidate < m, "ran out of basis vectors");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for j in 0..u.cols {
                    if j == t || (missing.contains(&j) && u.col(j).iter().all(|&x| x == 0.0)) {
                        continue;
                    }
                    let d: f64 = u.col(j).iter().zip(&e).map(|(a, b)| a * b).sum();
                    for (x, &a) in e.iter_mut().zip(u.col(j)) {
                        *x -= d * a;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for (o, x) in u.col_mut(t).iter_mut().zip(&e) {
                    *o = x / norm;
                }
                break;
            }
        }
    }
}

/// Largest singular value by power iteration on `a^T a`, independent of [`svd`].
pub fn spectral_norm_power(a: &Matrix, iterations: usize) -> f64 {
    let at = a.transpose();
    // irregular start so symmetric inputs cannot hide the top direction
    let mut x: Vec<f64> = (0..a.cols).map(|i| 1.0 + 0.3 * (1.7 * i as f64 + 0.4).sin()).collect();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let y = at.matvec(&a.matvec(&x));
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x = y.iter().map(|v| v / norm).collect();
        estimate = norm;
    }
    estimate.sqrt()
}
