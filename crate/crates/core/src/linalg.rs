//! Dense row-major matrices and the frozen sparsity patterns laid over them.

use serde::{Deserialize, Serialize};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Fixed set of trainable entries of a weight matrix.
///
/// Entries outside the pattern are held at exactly zero for the lifetime of the
/// network. Active columns are kept per row in CSR form so the forward pass and
/// the eligibility updates only visit live synapses.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    rows: usize,
    cols: usize,
    active: Vec<bool>,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl SparsityPattern {
    pub fn from_active(rows: usize, cols: usize, active: Vec<bool>) -> Self {
        assert_eq!(active.len(), rows * cols);
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in 0..rows {
            for c in 0..cols {
                if active[r * cols + c] {
                    col_idx.push(c as u32);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows,
            cols,
            active,
            row_ptr,
            col_idx,
        }
    }

    pub fn dense(rows: usize, cols: usize) -> Self {
        Self::from_active(rows, cols, vec![true; rows * cols])
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::from_active(rows, cols, vec![false; rows * cols])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_active(&self, r: usize, c: usize) -> bool {
        self.active[r * self.cols + c]
    }

    pub fn active_flags(&self) -> &[bool] {
        &self.active
    }

    /// Active column indices of row `r`.
    #[inline]
    pub fn row_cols(&self, r: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Offset of row `r`'s first synapse in the flattened synapse list.
    #[inline]
    pub fn row_start(&self, r: usize) -> usize {
        self.row_ptr[r]
    }

    pub fn n_active(&self) -> usize {
        self.col_idx.len()
    }

    pub fn n_masked(&self) -> usize {
        self.active.len() - self.col_idx.len()
    }

    /// Zeroes every masked entry of `m`.
    pub fn apply(&self, m: &mut Matrix) {
        assert_eq!((m.rows(), m.cols()), (self.rows, self.cols));
        for (x, &on) in m.as_mut_slice().iter_mut().zip(&self.active) {
            if !on {
                *x = 0.0;
            }
        }
    }

    /// Sparse matrix-vector product restricted to active entries, added into `out`.
    #[inline]
    pub fn matvec_add(&self, m: &Matrix, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = m.row(r);
            let mut acc = 0.0;
            for &c in self.row_cols(r) {
                acc += row[c as usize] * x[c as usize];
            }
            *o += acc;
        }
    }
}

/// Numerically stable softmax written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &y) in out.iter_mut().zip(logits) {
        *o = (y - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
