use crate::linalg::Mat;

/// A sum at or below this fraction of its operands' magnitude is treated as
/// an exact cancellation.
pub(crate) const CANCEL_TOL: f64 = 1e-12;

/// Column-major sparse real matrix. Each column holds `(row, value)` entries
/// sorted by row with no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            cols: vec![Vec::new(); ncols],
        }
    }

    /// Build from `(row, col, value)` triples. Duplicate positions are summed
    /// and exact zeros dropped. Panics on out-of-range indices.
    pub fn from_triplets(nrows: usize, ncols: usize, triples: &[(usize, usize, f64)]) -> Self {
        let mut m = SparseMatrix::zeros(nrows, ncols);
        for &(r, c, v) in triples {
            assert!(r < nrows && c < ncols, "triple ({r}, {c}) out of range");
            m.add_to(r, c, v);
        }
        m
    }

    /// Convert a dense matrix, dropping entries with `|x| <= chop`.
    pub fn from_dense(a: &Mat, chop: f64) -> Self {
        let mut m = SparseMatrix::zeros(a.nrows(), a.ncols());
        for c in 0..a.ncols() {
            for r in 0..a.nrows() {
                let v = a[(r, c)];
                if v.abs() > chop {
                    m.cols[c].push((r, v));
                }
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn col(&self, c: usize) -> &[(usize, f64)] {
        &self.cols[c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.cols[c].binary_search_by_key(&r, |&(i, _)| i) {
            Ok(k) => self.cols[c][k].1,
            Err(_) => 0.0,
        }
    }

    /// Add `v` to entry `(r, c)`, dropping it when the sum cancels.
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        let col = &mut self.cols[c];
        match col.binary_search_by_key(&r, |&(i, _)| i) {
            Ok(k) => {
                let old = col[k].1;
                col[k].1 += v;
                if col[k].1.abs() <= CANCEL_TOL * old.abs().max(v.abs()) {
                    col.remove(k);
                }
            }
            Err(k) => {
                if v != 0.0 {
                    col.insert(k, (r, v));
                }
            }
        }
    }

    /// Iterate `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(c, col)| col.iter().map(move |&(r, v)| (r, c, v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.triplets().fold(0.0_f64, |m, (_, _, v)| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.nrows, self.ncols());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = SparseMatrix::zeros(self.ncols(), self.nrows);
        for (r, c, v) in self.triplets() {
            t.cols[r].push((c, v));
        }
        t
    }

    /// Sparse product `self * rhs`.
    pub fn mul(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols(), rhs.nrows, "dimension mismatch in product");
        let mut out = SparseMatrix::zeros(self.nrows, rhs.ncols());
        let mut acc = vec![0.0; self.nrows];
        let mut seen = vec![false; self.nrows];
        let mut touched = Vec::new();
        for (c, col) in rhs.cols.iter().enumerate() {
            for &(k, b) in col {
                for &(r, a) in &self.cols[k] {
                    if !seen[r] {
                        seen[r] = true;
                        touched.push(r);
                    }
                    acc[r] += a * b;
                }
            }
            touched.sort_unstable();
            for &r in &touched {
                if acc[r] != 0.0 {
                    out.cols[c].push((r, acc[r]));
                }
                acc[r] = 0.0;
                seen[r] = false;
            }
            touched.clear();
        }
        out
    }

    /// Keep only the listed rows and columns (both sorted), reindexing them.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut row_map = vec![usize::MAX; self.nrows];
        for (k, &r) in rows.iter().enumerate() {
            row_map[r] = k;
        }
        let mut out = SparseMatrix::zeros(rows.len(), cols.len());
        for (k, &c) in cols.iter().enumerate() {
            out.cols[k] = self.cols[c]
                .iter()
                .filter(|&&(r, _)| row_map[r] != usize::MAX)
                .map(|&(r, v)| (row_map[r], v))
                .collect();
        }
        out
    }

    pub(crate) fn from_columns(nrows: usize, cols: Vec<Vec<(usize, f64)>>) -> Self {
        SparseMatrix { nrows, cols }
    }
}
