//! Triplet assembly and compressed sparse row storage.

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicates are summed on compression.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, ..Default::default() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, capacity: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            rows: Vec::with_capacity(capacity),
            cols: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.rows.push(row);
        self.cols.push(col);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Compresses into CSR. Entries are summed in insertion order per
    /// (row, col), so the result is deterministic.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut row_counts = vec![0usize; self.n_rows + 1];
        for &r in &self.rows {
            row_counts[r + 1] += 1;
        }
        for i in 0..self.n_rows {
            row_counts[i + 1] += row_counts[i];
        }
        // bucket by row, stable in insertion order
        let mut order = vec![0usize; self.len()];
        let mut next = row_counts.clone();
        for (k, &r) in self.rows.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.len());
        let mut values = Vec::with_capacity(self.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..self.n_rows {
            scratch.clear();
            scratch.extend(order[row_counts[r]..row_counts[r + 1]].iter().map(|&k| (self.cols[k], self.values[k])));
            scratch.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < scratch.len() {
                let c = scratch[i].0;
                let mut v = 0.0;
                while i < scratch.len() && scratch[i].0 == c {
                    v += scratch[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from CSR arrays with sorted, in-range column indices.
    pub fn from_raw_parts(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let ok = row_ptr.len() == n_rows + 1
            && row_ptr.first() == Some(&0)
            && row_ptr.last() == Some(&col_idx.len())
            && col_idx.len() == values.len()
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && (0..n_rows).all(|i| {
                let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&j| j < n_cols)
            });
        if !ok {
            return Err(Error::Dimension("inconsistent CSR arrays".into()));
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut t = Triplets::new(rows.len(), n_cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csr()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::Dimension(format!(
                "matrix has {} columns, vector has {} entries",
                self.n_cols,
                x.len()
            )));
        }
        Ok((0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Symmetric elimination of `dofs`: their rows and columns are cleared
    /// and the diagonal set to one. Returns the removed column entries
    /// `(row, col, value)` so callers can correct a right-hand side.
    pub fn eliminate_symmetric(&mut self, dofs: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut constrained = vec![false; self.n_rows];
        for &d in dofs {
            constrained[d] = true;
        }
        let mut removed = Vec::new();
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if constrained[i] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                } else if constrained[j] {
                    if self.values[k] != 0.0 {
                        removed.push((i, j, self.values[k]));
                    }
                    self.values[k] = 0.0;
                }
            }
        }
        // a constrained row must carry its diagonal entry
        let missing: Vec<usize> =
            dofs.iter().copied().filter(|&d| self.get(d, d) != 1.0).collect();
        if !missing.is_empty() {
            let mut t = Triplets::new(self.n_rows, self.n_cols);
            for i in 0..self.n_rows {
                for (j, v) in self.row(i) {
                    t.push(i, j, v);
                }
            }
            for d in missing {
                t.push(d, d, 1.0);
            }
            *self = t.to_csr();
        }
        removed
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0)))
    }
}
