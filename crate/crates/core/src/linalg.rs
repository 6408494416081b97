//! Minimal dense matrix support: the problems here are `p x p` with desk-scale
//! `p`, so a flat row-major `Vec<f64>` plus a power iteration is all we need.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// `M M^T`.
    pub fn times_transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    /// Symmetric rank-one update `self += alpha * v v^T` (square only).
    pub fn add_scaled_outer(&mut self, alpha: f64, v: &[f64]) {
        assert_eq!(self.rows, self.cols, "outer update needs a square matrix");
        assert_eq!(v.len(), self.rows, "outer update shape mismatch");
        for i in 0..self.rows {
            let a = alpha * v[i];
            if a == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (slot, &vj) in row.iter_mut().zip(v) {
                *slot += a * vj;
            }
        }
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm2(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
    n
}

/// Result of the symmetric power iteration.
pub struct TopEigen {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration with a Rayleigh-quotient stopping rule. Starts from the
/// normalized all-ones vector; if that start is annihilated, retries from a
/// deterministic tilted start.
pub fn top_eigen_psd(m: &Matrix, tol: f64, max_iters: usize) -> Result<TopEigen> {
    if m.rows() != m.cols() {
        return Err(Error::domain("power iteration needs a square matrix"));
    }
    let n = m.rows();
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix has a non-finite entry".into()));
    }
    let scale = m.frobenius();
    if scale == 0.0 {
        return Ok(TopEigen {
            value: 0.0,
            vector: vec![0.0; n],
            iterations: 0,
            converged: true,
        });
    }

    let ones = vec![1.0; n];
    let tilted: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    for start in [ones, tilted] {
        let mut x = start;
        normalize(&mut x);
        let mut lambda = 0.0;
        let mut dead_start = false;
        for iter in 0..max_iters {
            let y = m.matvec(&x);
            let next = dot(&x, &y);
            let ny = norm2(&y);
            if ny <= f64::MIN_POSITIVE * scale.max(1.0) {
                dead_start = true;
                break;
            }
            for (slot, v) in x.iter_mut().zip(&y) {
                *slot = v / ny;
            }
            if (next - lambda).abs() < tol * next.abs().max(1.0) {
                return Ok(TopEigen {
                    value: next,
                    vector: x,
                    iterations: iter + 1,
                    converged: true,
                });
            }
            lambda = next;
        }
        if !dead_start {
            return Ok(TopEigen {
                value: lambda,
                vector: x,
                iterations: max_iters,
                converged: false,
            });
        }
    }
    // Both deterministic starts were annihilated (e.g. rank-one mass exactly
    // orthogonal to them); treat as a degenerate zero estimate.
    Ok(TopEigen {
        value: 0.0,
        vector: vec![0.0; n],
        iterations: 0,
        converged: false,
    })
}
