//! Compressed sparse row matrices sized for the assembly patterns produced by
//! `fem`. Triplet input is deduplicated by summation so element loops can push
//! overlapping contributions directly.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("triplet ({row}, {col}) outside a {nrows} x {ncols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("pattern mismatch in linear combination: operand {index} differs from operand 0")]
    PatternMismatch { index: usize },
}

/// One `(row, col, value)` assembly contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Triplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Self { row, col, value }
    }
}

/// CSR matrix with sorted column indices per row. Duplicate triplets are
/// summed at construction, and explicitly stored zeros are kept so the
/// pattern depends only on which entries were pushed, not on their values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[Triplet],
    ) -> Result<Self, SparseError> {
        for t in triplets {
            if t.row >= nrows || t.col >= ncols {
                return Err(SparseError::OutOfBounds {
                    row: t.row,
                    col: t.col,
                    nrows,
                    ncols,
                });
            }
        }
        // Counting sort by row keeps construction O(nnz + n) and deterministic.
        let mut row_counts = vec![0usize; nrows + 1];
        for t in triplets {
            row_counts[t.row + 1] += 1;
        }
        for i in 0..nrows {
            row_counts[i + 1] += row_counts[i];
        }
        let mut order = vec![0usize; triplets.len()];
        let mut cursor = row_counts.clone();
        for (k, t) in triplets.iter().enumerate() {
            order[cursor[t.row]] = k;
            cursor[t.row] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row_buf.clear();
            for &k in &order[row_counts[r]..row_counts[r + 1]] {
                row_buf.push((triplets[k].col, triplets[k].value));
            }
            row_buf.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row_buf.len() {
                let col = row_buf[i].0;
                let mut sum = 0.0;
                while i < row_buf.len() && row_buf[i].0 == col {
                    sum += row_buf[i].1;
                    i += 1;
                }
                col_idx.push(col);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds directly from CSR arrays; columns must be sorted and unique
    /// within each row.
    pub fn from_raw_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1);
        assert_eq!(col_idx.len(), values.len());
        assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        debug_assert!((0..nrows).all(|r| {
            let row = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            row.windows(2).all(|w| w[0] < w[1]) && row.iter().all(|&c| c < ncols)
        }));
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
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
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entries of one row as parallel (column, value) slices.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// x^T A y, accumulated row by row.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        let mut acc = 0.0;
        for r in 0..self.nrows {
            let mut row_acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row_acc += self.values[k] * y[self.col_idx[k]];
            }
            acc += x[r] * row_acc;
        }
        acc
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for i in 0..self.ncols {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = row_ptr.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                col_idx[cursor[c]] = r;
                values[cursor[c]] = self.values[k];
                cursor[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Returns whether two matrices share the exact sparsity pattern.
    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// Sum of scaled matrices sharing one pattern; the result keeps it.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix, SparseError> {
        assert!(!terms.is_empty());
        let base = terms[0].1;
        for (i, (_, m)) in terms.iter().enumerate().skip(1) {
            if !m.same_pattern(base) {
                return Err(SparseError::PatternMismatch { index: i });
            }
        }
        let mut out = base.clone();
        for v in out.values.iter_mut() {
            *v = 0.0;
        }
        for (coef, m) in terms {
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += coef * v;
            }
        }
        Ok(out)
    }

    /// max |A_ij - A_ji| over the union pattern; 0 for an exactly symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = t.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let a_col = ca.get(i).copied().unwrap_or(usize::MAX);
                let b_col = cb.get(j).copied().unwrap_or(usize::MAX);
                if a_col == b_col {
                    worst = worst.max((va[i] - vb[j]).abs());
                    i += 1;
                    j += 1;
                } else if a_col < b_col {
                    worst = worst.max(va[i].abs());
                    i += 1;
                } else {
                    worst = worst.max(vb[j].abs());
                    j += 1;
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
