//! Minimal CSR sparse matrix, just enough for the discretization and the
//! Krylov solver: row-ordered construction, matvec, row scaling.

use crate::error::{GsError, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.vals[a..b])
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn diag_index(&self, i: usize) -> Option<usize> {
        (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.col_idx[k] == i)
    }

    /// Scale row i by s[i] in place.
    pub fn scale_rows(&mut self, s: &[f64]) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                self.vals[k] *= s[i];
            }
        }
    }

    /// Largest absolute entry per row (0.0 for an empty row).
    pub fn row_max_abs(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.vals[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .collect()
    }
}

/// Builds a CSR matrix one row at a time, in row order. Duplicate column
/// entries within a row are summed.
#[derive(Debug)]
pub struct CsrBuilder {
    n: usize,
    next_row: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self { n, next_row: 0, row_ptr, col_idx: Vec::new(), vals: Vec::new() }
    }

    /// Append the next row. `entries` is consumed (sorted and merged).
    pub fn push_row(&mut self, entries: &mut Vec<(usize, f64)>) -> Result<()> {
        if self.next_row >= self.n {
            return Err(GsError::Internal("more rows pushed than matrix size".into()));
        }
        entries.sort_unstable_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in entries.iter() {
            if c >= self.n {
                return Err(GsError::Internal(format!(
                    "column {c} out of bounds in row {}",
                    self.next_row
                )));
            }
            if last == Some(c) {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.col_idx.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        self.next_row += 1;
        entries.clear();
        Ok(())
    }

    pub fn finish(self) -> Result<CsrMatrix> {
        if self.next_row != self.n {
            return Err(GsError::Internal(format!(
                "matrix has {} of {} rows",
                self.next_row, self.n
            )));
        }
        Ok(CsrMatrix { n: self.n, row_ptr: self.row_ptr, col_idx: self.col_idx, vals: self.vals })
    }
}
