//! A mutable sparse complex for iterated single-pair reductions.
//!
//! Cells keep their source indices; removed cells are marked dead. Each
//! column stores the boundary of one cell, and each cell keeps a list of
//! cofaces that may contain stale entries (checked on use). `‖∂τ‖_W` is
//! cached and invalidated only for cells whose column changed.

use crate::complex::sparse::CANCEL_TOL;
use crate::complex::{BasedChainComplex, CellId, SparseMatrix};

#[derive(Debug, Clone)]
pub(crate) struct WorkingComplex<'a> {
    source: &'a BasedChainComplex,
    alive: Vec<Vec<bool>>,
    cols: Vec<Vec<Vec<(usize, f64)>>>,
    cofaces: Vec<Vec<Vec<usize>>>,
    norms: Vec<Vec<Option<f64>>>,
    dims: Vec<usize>,
}

/// What a pairing did, for updating signals.
#[derive(Debug, Clone)]
pub(crate) struct PairEffect {
    pub pivot: f64,
    /// `∂α` without the `β` entry.
    pub alpha_col: Vec<(usize, f64)>,
    /// `(σ, ∂_{β,σ})` for the other cofaces of `β`.
    pub beta_row: Vec<(usize, f64)>,
}

fn lookup(col: &[(usize, f64)], r: usize) -> f64 {
    match col.binary_search_by_key(&r, |&(i, _)| i) {
        Ok(k) => col[k].1,
        Err(_) => 0.0,
    }
}

impl<'a> WorkingComplex<'a> {
    pub(crate) fn new(source: &'a BasedChainComplex) -> Self {
        let top = source.max_degree();
        let mut cols = Vec::with_capacity(top + 1);
        let mut cofaces: Vec<Vec<Vec<usize>>> =
            (0..=top).map(|n| vec![Vec::new(); source.dim(n)]).collect();
        for n in 0..=top {
            let b = source.boundary(n);
            let c: Vec<Vec<(usize, f64)>> = (0..source.dim(n)).map(|i| b.col(i).to_vec()).collect();
            if n >= 1 {
                for (i, col) in c.iter().enumerate() {
                    for &(r, _) in col {
                        cofaces[n - 1][r].push(i);
                    }
                }
            }
            cols.push(c);
        }
        WorkingComplex {
            source,
            alive: (0..=top).map(|n| vec![true; source.dim(n)]).collect(),
            cols,
            cofaces,
            norms: (0..=top).map(|n| vec![None; source.dim(n)]).collect(),
            dims: source.dims(),
        }
    }

    pub(crate) fn source(&self) -> &'a BasedChainComplex {
        self.source
    }

    pub(crate) fn max_degree(&self) -> usize {
        self.source.max_degree()
    }

    pub(crate) fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub(crate) fn is_alive(&self, c: CellId) -> bool {
        self.alive[c.degree][c.index]
    }

    pub(crate) fn alive_cells(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.alive[n]
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
    }

    pub(crate) fn column(&self, c: CellId) -> &[(usize, f64)] {
        &self.cols[c.degree][c.index]
    }

    pub(crate) fn incidence(&self, alpha: CellId, beta: CellId) -> f64 {
        lookup(&self.cols[alpha.degree][alpha.index], beta.index)
    }

    /// `‖∂τ‖` in the inner product of degree `deg τ - 1`.
    pub(crate) fn boundary_norm(&mut self, c: CellId) -> f64 {
        if let Some(v) = self.norms[c.degree][c.index] {
            return v;
        }
        let v = if c.degree == 0 {
            0.0
        } else {
            self.source
                .inner_product_of(c.degree - 1)
                .sparse_norm_sq(&self.cols[c.degree][c.index])
                .max(0.0)
                .sqrt()
        };
        self.norms[c.degree][c.index] = Some(v);
        v
    }

    /// Live cofaces `σ` of `c` with `∂_{c,σ}`, sorted by index.
    pub(crate) fn coface_row(&self, c: CellId) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self.cofaces[c.degree][c.index]
            .iter()
            .filter(|&&s| self.alive[c.degree + 1][s])
            .filter_map(|&s| {
                let v = lookup(&self.cols[c.degree + 1][s], c.index);
                (v != 0.0).then_some((s, v))
            })
            .collect();
        out.sort_unstable_by_key(|&(s, _)| s);
        out.dedup_by_key(|&mut (s, _)| s);
        out
    }

    /// Reduce the pair `(alpha, beta)` in place with the single-pair closed
    /// form. The caller guarantees both cells are alive and the incidence is
    /// nonzero.
    pub(crate) fn pair(&mut self, alpha: CellId, beta: CellId) -> PairEffect {
        let d = beta.degree;
        let pivot = self.incidence(alpha, beta);
        debug_assert!(pivot != 0.0 && self.is_alive(alpha) && self.is_alive(beta));
        let alpha_col: Vec<(usize, f64)> = self.cols[d + 1][alpha.index]
            .iter()
            .copied()
            .filter(|&(r, _)| r != beta.index)
            .collect();
        let beta_row: Vec<(usize, f64)> = self
            .coface_row(beta)
            .into_iter()
            .filter(|&(s, _)| s != alpha.index)
            .collect();
        for &(sigma, v) in &beta_row {
            let c = -v / pivot;
            let old = std::mem::take(&mut self.cols[d + 1][sigma]);
            let mut merged = Vec::with_capacity(old.len() + alpha_col.len());
            let (mut i, mut j) = (0, 0);
            while i < old.len() || j < alpha_col.len() {
                let ri = old.get(i).map_or(usize::MAX, |e| e.0);
                let rj = alpha_col.get(j).map_or(usize::MAX, |e| e.0);
                if ri < rj {
                    if ri != beta.index {
                        merged.push(old[i]);
                    }
                    i += 1;
                } else if rj < ri {
                    merged.push((rj, c * alpha_col[j].1));
                    self.cofaces[d][rj].push(sigma);
                    j += 1;
                } else {
                    let (a, b) = (old[i].1, c * alpha_col[j].1);
                    let sum = a + b;
                    if sum.abs() > CANCEL_TOL * a.abs().max(b.abs()) {
                        merged.push((ri, sum));
                    }
                    i += 1;
                    j += 1;
                }
            }
            self.cols[d + 1][sigma] = merged;
            self.norms[d + 1][sigma] = None;
        }
        if d + 2 <= self.max_degree() {
            let ups = std::mem::take(&mut self.cofaces[d + 1][alpha.index]);
            for g in ups {
                if self.alive[d + 2][g] {
                    let col = &mut self.cols[d + 2][g];
                    if let Ok(k) = col.binary_search_by_key(&alpha.index, |&(r, _)| r) {
                        col.remove(k);
                        self.norms[d + 2][g] = None;
                    }
                }
            }
        }
        for c in [alpha, beta] {
            self.alive[c.degree][c.index] = false;
            self.cols[c.degree][c.index].clear();
            self.dims[c.degree] -= 1;
        }
        self.cofaces[d][beta.index].clear();
        PairEffect {
            pivot,
            alpha_col,
            beta_row,
        }
    }

    /// The current complex as an immutable complex on the live cells, with
    /// the source index of every kept cell.
    pub(crate) fn materialize(&self) -> (BasedChainComplex, Vec<Vec<usize>>) {
        let top = self.max_degree();
        let keep: Vec<Vec<usize>> = (0..=top).map(|n| self.alive_cells(n).collect()).collect();
        let mut boundary = vec![SparseMatrix::zeros(0, keep[0].len())];
        for n in 1..=top {
            let mut pos = vec![usize::MAX; self.source.dim(n - 1)];
            for (k, &i) in keep[n - 1].iter().enumerate() {
                pos[i] = k;
            }
            let cols = keep[n]
                .iter()
                .map(|&i| {
                    self.cols[n][i]
                        .iter()
                        .map(|&(r, v)| (pos[r], v))
                        .collect()
                })
                .collect();
            boundary.push(SparseMatrix::from_columns(keep[n - 1].len(), cols));
        }
        (self.source.with_cells(&keep, boundary), keep)
    }
}
