//! Small linear-algebra layer: dense aliases, a CSR matrix for fast
//! matrix-vector products, and power-iteration norm estimates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Compressed sparse row matrix. Only used for products; factorizations go
/// through the dense representation.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the CSR form of `dense`, dropping exact zeros.
    pub fn from_dense(dense: &Matrix) -> Self {
        let (nrows, ncols) = dense.shape();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = dense[(i, j)];
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out = self * x`
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = 0.0;
            for p in lo..hi {
                acc += self.values[p] * x[self.indices[p]];
            }
            *o = acc;
        }
    }

    /// `out = self^T * x`
    pub fn mul_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, xi) in x.iter().enumerate() {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out[self.indices[p]] += self.values[p] * xi;
            }
        }
    }
}

/// Spectral norm estimate of `a` by power iteration on `AᵀA`.
///
/// Converges from below, so the estimate never exceeds the true norm by
/// more than rounding. Stops when the relative change of the estimate drops
/// under `rel_tol` or after `max_iter` sweeps.
pub fn spectral_norm_estimate(a: &CsrMatrix, rel_tol: f64, max_iter: usize) -> f64 {
    if a.nnz() == 0 {
        return 0.0;
    }
    // Random start so the iterate is not orthogonal to the top singular
    // vector for structured matrices; fixed seed keeps it reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(0x0005_eed0_fa11);
    let mut x: Vec<f64> = (0..a.ncols()).map(|_| rng.random::<f64>() + 0.5).collect();
    normalize(&mut x);
    let mut ax = vec![0.0; a.nrows()];
    let mut atax = vec![0.0; a.ncols()];
    let mut est = 0.0_f64;
    for _ in 0..max_iter {
        a.mul_into(&x, &mut ax);
        a.mul_transpose_into(&ax, &mut atax);
        let lambda = dot(&x, &atax);
        let next = lambda.max(0.0).sqrt();
        let nrm = norm(&atax);
        if nrm == 0.0 {
            return next;
        }
        x.iter_mut().zip(&atax).for_each(|(xi, v)| *xi = v / nrm);
        if (next - est).abs() <= rel_tol * next {
            return next;
        }
        est = next;
    }
    est
}

/// Power-iteration estimate of the spectral norm of a dense matrix.
pub fn dense_norm_estimate(a: &Matrix) -> f64 {
    spectral_norm_estimate(&CsrMatrix::from_dense(a), 1e-13, 50_000)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// True when every entry is finite.
pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}
