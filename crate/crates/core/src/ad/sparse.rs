use crate::ad::Matrix;
use crate::error::{shape_err, Result};

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_row_entries(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, entries) in rows.iter().enumerate() {
            for &(j, v) in entries {
                if j >= cols {
                    return shape_err(
                        "sparse",
                        format!("row {i} references column {j} of {cols}"),
                    );
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs stored for row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out[(i, j)] += v;
            }
        }
        out
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (&j, &v) in self.col_idx.iter().zip(&self.values) {
            out[j] += v;
        }
        out
    }

    /// `self · x` for dense `x`.
    pub fn matmul_dense(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.cols {
            return shape_err(
                "sparse_matmul",
                format!("{}x{} · {}x{}", self.rows, self.cols, x.rows(), x.cols()),
            );
        }
        let mut out = Matrix::zeros(self.rows, x.cols());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                for (o, &s) in out.row_mut(i).iter_mut().zip(x.row(j)) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x` for dense `x`.
    pub fn t_matmul_dense(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.rows {
            return shape_err(
                "sparse_t_matmul",
                format!("({}x{})ᵀ · {}x{}", self.rows, self.cols, x.rows(), x.cols()),
            );
        }
        let mut out = Matrix::zeros(self.cols, x.cols());
        for i in 0..self.rows {
            let src = x.row(i);
            for (j, v) in self.row(i) {
                for (o, &s) in out.row_mut(j).iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }
}
