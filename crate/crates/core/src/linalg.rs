//! Small linear-algebra helpers shared by the estimators: coordinate-sorted
//! sparse storage and a rank-aware SPD solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative pivot threshold below which a Gram matrix is treated as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Keeps every entry of `dense` that is exactly nonzero.
    pub fn from_dense(dense: &[f64]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        Self {
            dim: dense.len(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |(i, _)| *i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Inner product with a dense slice, summed in index order.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }
}

/// Sparse matrix stored as `(row, col, value)` triplets sorted by
/// `(row, col)`, without duplicates or stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for r in 0..dense.nrows() {
            for c in 0..dense.ncols() {
                let v = dense[(r, c)];
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self {
            rows: dense.nrows(),
            cols: dense.ncols(),
            entries,
        }
    }

    /// Stacks sparse rows (each of length `cols`) into a matrix.
    pub fn from_rows(rows: &[SparseVector], cols: usize) -> Self {
        let mut entries = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.dim(), cols, "row {r} has wrong dimension");
            entries.extend(row.entries().iter().map(|&(c, v)| (r, c, v)));
        }
        Self {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    /// Builds from unsorted triplets. Zeros are dropped; duplicates and
    /// out-of-range or non-finite entries are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, String> {
        triplets.retain(|t| t.2 != 0.0);
        triplets.sort_by_key(|a| (a.0, a.1));
        for w in triplets.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(format!("duplicate entry ({}, {})", w[0].0, w[0].1));
            }
        }
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(format!("entry ({r}, {c}) outside {rows}x{cols}"));
            }
            if !v.is_finite() {
                return Err(format!("entry ({r}, {c}) is not finite"));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries: triplets,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self
            .entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
        {
            Ok(pos) => self.entries[pos].2,
            Err(_) => 0.0,
        }
    }

    /// Entries of one row as `(col, value)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = self.entries.partition_point(|e| e.0 < row);
        let end = self.entries.partition_point(|e| e.0 <= row);
        self.entries[start..end].iter().map(|&(_, c, v)| (c, v))
    }

    pub fn row_nnz(&self) -> Vec<usize> {
        let mut counts = vec![0; self.rows];
        for &(r, _, _) in &self.entries {
            counts[r] += 1;
        }
        counts
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            out[(r, c)] = v;
        }
        out
    }

    /// `self * x` for a dense vector, rows summed in column order.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
        out
    }

    /// Scales every row so that its ℓ2 norm is one. Empty rows stay empty.
    pub fn normalize_rows(&mut self) {
        let mut norms = vec![0.0; self.rows];
        for &(r, _, v) in &self.entries {
            norms[r] += v * v;
        }
        for e in &mut self.entries {
            e.2 /= norms[e.0].sqrt();
        }
    }
}

/// Solves `gram * x = rhs` for a symmetric positive semidefinite `gram`.
/// Returns `None` when a Cholesky pivot falls below `RANK_TOL` relative to
/// the matching diagonal entry.
pub fn solve_spd(gram: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = gram.nrows();
    let chol = nalgebra::Cholesky::new(gram.clone())?;
    let l = chol.l_dirty();
    for j in 0..n {
        let pivot = l[(j, j)] * l[(j, j)];
        if !(pivot > RANK_TOL * gram[(j, j)].abs().max(f64::MIN_POSITIVE)) {
            return None;
        }
    }
    Some(chol.solve(rhs))
}

pub fn solve_spd_vec(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    solve_spd(gram, &m).map(|x| DVector::from_column_slice(x.as_slice()))
}
