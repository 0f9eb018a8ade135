//! Finite-type based chain complexes over the reals.
//!
//! Every cell spans a one-dimensional component, so a complex is a list of
//! named cells per degree, one sparse boundary matrix per degree and one
//! symmetric positive-definite inner-product matrix per degree. The order of
//! cells inside a degree is the row/column order of every matrix.

pub(crate) mod io;
pub(crate) mod sparse;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{load, load_unchecked, save, ComplexFile, SignalFile};
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Structural tolerance for `∂∂ = 0`.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Symmetry tolerance for inner-product matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Positive definiteness: smallest eigenvalue must exceed this times the trace.
pub const SPD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub degree: usize,
    pub index: usize,
}

impl CellId {
    pub fn new(degree: usize, index: usize) -> Self {
        CellId { degree, index }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.degree, self.index)
    }
}

/// Inner product on one chain group, `<x, y> = x^T W y`.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerProduct {
    Diagonal(Vec<f64>),
    Dense(Mat),
}

impl InnerProduct {
    pub fn identity(dim: usize) -> Self {
        InnerProduct::Diagonal(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            InnerProduct::Diagonal(d) => d.len(),
            InnerProduct::Dense(m) => m.nrows(),
        }
    }

    pub fn matrix(&self) -> Mat {
        match self {
            InnerProduct::Diagonal(d) => Mat::from_diagonal(&Vector::from_column_slice(d)),
            InnerProduct::Dense(m) => m.clone(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            InnerProduct::Diagonal(_) => true,
            InnerProduct::Dense(m) => linalg::is_diagonal(m),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            InnerProduct::Diagonal(d) => d.iter().all(|&x| x == 1.0),
            InnerProduct::Dense(m) => *m == Mat::identity(m.nrows(), m.ncols()),
        }
    }

    /// Diagonal entry `W[i][i]`.
    pub fn weight(&self, i: usize) -> f64 {
        match self {
            InnerProduct::Diagonal(d) => d[i],
            InnerProduct::Dense(m) => m[(i, i)],
        }
    }

    /// Entry `W[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            InnerProduct::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            InnerProduct::Dense(m) => m[(i, j)],
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            InnerProduct::Diagonal(d) => Vector::from_fn(x.len(), |i, _| d[i] * x[i]),
            InnerProduct::Dense(m) => m * x,
        }
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        x.dot(&self.apply(y))
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Squared norm of a sparse vector given as `(index, value)` entries.
    pub fn sparse_norm_sq(&self, x: &[(usize, f64)]) -> f64 {
        match self {
            InnerProduct::Diagonal(d) => x.iter().map(|&(i, v)| d[i] * v * v).sum(),
            InnerProduct::Dense(m) => x
                .iter()
                .flat_map(|&(i, a)| x.iter().map(move |&(j, b)| a * m[(i, j)] * b))
                .sum(),
        }
    }

    /// Restriction to the listed coordinates.
    pub fn restrict(&self, keep: &[usize]) -> InnerProduct {
        match self {
            InnerProduct::Diagonal(d) => InnerProduct::Diagonal(keep.iter().map(|&i| d[i]).collect()),
            InnerProduct::Dense(m) => {
                let sub = linalg::principal_submatrix(m, keep);
                if linalg::is_diagonal(&sub) {
                    InnerProduct::Diagonal(sub.diagonal().iter().copied().collect())
                } else {
                    InnerProduct::Dense(sub)
                }
            }
        }
    }

    /// `W^{-1} x`.
    pub fn solve(&self, x: &Mat) -> Mat {
        match self {
            InnerProduct::Diagonal(d) => {
                let mut out = x.clone();
                for (i, w) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(1.0 / w);
                }
                out
            }
            InnerProduct::Dense(m) => linalg::solve(m, x).expect("inner product is invertible"),
        }
    }
}

/// A real-valued chain on the cells of one degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub degree: usize,
    pub values: Vector,
}

impl Signal {
    pub fn new(degree: usize, values: Vec<f64>) -> Self {
        Signal {
            degree,
            values: Vector::from_vec(values),
        }
    }

    pub fn from_vector(degree: usize, values: Vector) -> Self {
        Signal { degree, values }
    }

    pub fn zeros(degree: usize, len: usize) -> Self {
        Signal {
            degree,
            values: Vector::zeros(len),
        }
    }

    /// Indicator signal of one cell.
    pub fn basis(complex: &BasedChainComplex, cell: CellId) -> Self {
        let mut s = Signal::zeros(cell.degree, complex.dim(cell.degree));
        s.values[cell.index] = 1.0;
        s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: String,
    pub location: String,
    pub magnitude: f64,
}

/// Outcome of a structural check. `ok` holds exactly when `violations` is
/// empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, check: &str) -> bool {
        self.violations.iter().any(|v| v.check == check)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{} at {} (magnitude {:e})", v.check, v.location, v.magnitude)?;
        }
        Ok(())
    }
}

/// A finite-type based chain complex with one-dimensional cell components.
#[derive(Debug, Clone, PartialEq)]
pub struct BasedChainComplex {
    names: Vec<Vec<String>>,
    /// `boundary[n] : C_n -> C_{n-1}`; `boundary[0]` has zero rows.
    boundary: Vec<SparseMatrix>,
    weights: Vec<InnerProduct>,
    lookup: HashMap<String, CellId>,
}

impl BasedChainComplex {
    /// Assemble a complex from per-degree cell names, boundary matrices
    /// (`boundaries[n]` for `n >= 1`; entry 0 is ignored if present) and
    /// optional inner products. Shapes and name uniqueness are checked here;
    /// numerical invariants are checked by [`validate`](Self::validate).
    pub fn new(
        names: Vec<Vec<String>>,
        boundaries: Vec<SparseMatrix>,
        weights: Option<Vec<InnerProduct>>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("a complex needs at least degree 0".into()));
        }
        let top = names.len();
        let mut boundary = Vec::with_capacity(top);
        boundary.push(SparseMatrix::zeros(0, names[0].len()));
        let offset = if boundaries.len() == top { 1 } else { 0 };
        if boundaries.len() + 1 - offset != top {
            return Err(Error::Config(format!(
                "expected {} boundary matrices, got {}",
                top - 1,
                boundaries.len() - offset
            )));
        }
        for (k, b) in boundaries.into_iter().skip(offset).enumerate() {
            let n = k + 1;
            if b.nrows() != names[n - 1].len() || b.ncols() != names[n].len() {
                return Err(Error::Config(format!(
                    "boundary {n} has shape {}x{}, expected {}x{}",
                    b.nrows(),
                    b.ncols(),
                    names[n - 1].len(),
                    names[n].len()
                )));
            }
            boundary.push(b);
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != top {
                    return Err(Error::Config(format!(
                        "expected {top} inner products, got {}",
                        w.len()
                    )));
                }
                for (n, ip) in w.iter().enumerate() {
                    if ip.dim() != names[n].len() {
                        return Err(Error::Config(format!(
                            "inner product {n} has dimension {}, expected {}",
                            ip.dim(),
                            names[n].len()
                        )));
                    }
                    if let InnerProduct::Dense(m) = ip {
                        if m.nrows() != m.ncols() {
                            return Err(Error::Config(format!("inner product {n} is not square")));
                        }
                    }
                }
                w
            }
            None => names.iter().map(|c| InnerProduct::identity(c.len())).collect(),
        };
        let mut lookup = HashMap::new();
        for (d, cells) in names.iter().enumerate() {
            for (i, name) in cells.iter().enumerate() {
                if lookup.insert(name.clone(), CellId::new(d, i)).is_some() {
                    return Err(Error::Config(format!("duplicate cell name {name:?}")));
                }
            }
        }
        Ok(BasedChainComplex {
            names,
            boundary,
            weights,
            lookup,
        })
    }

    /// Simplicial chain complex generated by the given facets (vertex lists),
    /// with the standard orientation by increasing vertex label. Simplices are
    /// named `v0`, `e0_1`, `t0_1_2`, `s3:0_1_2_3`, ...
    pub fn from_simplices(facets: &[&[usize]]) -> Self {
        let mut by_dim: Vec<Vec<Vec<usize>>> = Vec::new();
        for facet in facets {
            let mut f = facet.to_vec();
            f.sort_unstable();
            f.dedup();
            let k = f.len();
            for mask in 1u64..(1u64 << k) {
                let s: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| f[b]).collect();
                let d = s.len() - 1;
                if by_dim.len() <= d {
                    by_dim.resize(d + 1, Vec::new());
                }
                by_dim[d].push(s);
            }
        }
        for cells in &mut by_dim {
            cells.sort();
            cells.dedup();
        }
        let names: Vec<Vec<String>> = by_dim
            .iter()
            .map(|cells| cells.iter().map(|s| simplex_name(s)).collect())
            .collect();
        let mut boundaries = Vec::new();
        for d in 1..by_dim.len() {
            let index: HashMap<&[usize], usize> = by_dim[d - 1]
                .iter()
                .enumerate()
                .map(|(i, s)| (s.as_slice(), i))
                .collect();
            let mut triples = Vec::new();
            for (c, s) in by_dim[d].iter().enumerate() {
                for drop in 0..s.len() {
                    let face: Vec<usize> = s
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != drop)
                        .map(|(_, &v)| v)
                        .collect();
                    let sign = if drop % 2 == 0 { 1.0 } else { -1.0 };
                    triples.push((index[face.as_slice()], c, sign));
                }
            }
            boundaries.push(SparseMatrix::from_triplets(
                by_dim[d - 1].len(),
                by_dim[d].len(),
                &triples,
            ));
        }
        BasedChainComplex::new(names, boundaries, None).expect("simplicial complex is well formed")
    }

    pub fn max_degree(&self) -> usize {
        self.names.len() - 1
    }

    /// Number of cells in degree `n` (zero outside the range).
    pub fn dim(&self, n: usize) -> usize {
        self.names.get(n).map_or(0, Vec::len)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.names.iter().map(Vec::len).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.names.iter().map(Vec::len).sum()
    }

    pub fn cell_names(&self, n: usize) -> &[String] {
        &self.names[n]
    }

    pub fn name(&self, cell: CellId) -> &str {
        &self.names[cell.degree][cell.index]
    }

    pub fn cell(&self, name: &str) -> Result<CellId> {
        self.lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownCell(name.to_string()))
    }

    pub fn cells(&self, n: usize) -> impl Iterator<Item = CellId> + '_ {
        (0..self.dim(n)).map(move |i| CellId::new(n, i))
    }

    pub fn all_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..=self.max_degree()).flat_map(move |n| self.cells(n))
    }

    /// Sparse boundary `∂_n : C_n -> C_{n-1}` for `1 <= n <= max_degree`.
    pub fn boundary(&self, n: usize) -> &SparseMatrix {
        &self.boundary[n]
    }

    /// Coefficient `∂_{β,α}` for `α` of degree `d` and `β` of degree `d - 1`;
    /// zero for cells that are not incident.
    pub fn incidence(&self, alpha: CellId, beta: CellId) -> f64 {
        if alpha.degree == 0 || beta.degree + 1 != alpha.degree || alpha.degree > self.max_degree() {
            return 0.0;
        }
        self.boundary[alpha.degree].get(beta.index, alpha.index)
    }

    /// Dense `∂_n` for `0 <= n <= max_degree + 1`; the ends are empty maps.
    pub fn boundary_dense(&self, n: usize) -> Mat {
        if n == 0 {
            Mat::zeros(0, self.dim(0))
        } else if n > self.max_degree() {
            Mat::zeros(self.dim(n - 1), 0)
        } else {
            self.boundary[n].to_dense()
        }
    }

    pub fn inner_product_of(&self, n: usize) -> &InnerProduct {
        &self.weights[n]
    }

    pub fn weight_matrix(&self, n: usize) -> Mat {
        if n > self.max_degree() {
            return Mat::zeros(0, 0);
        }
        self.weights[n].matrix()
    }

    pub fn inner_products(&self) -> &[InnerProduct] {
        &self.weights
    }

    /// True when every inner-product matrix is diagonal, i.e. the cell basis
    /// is orthogonal.
    pub fn is_orthogonal_base(&self) -> bool {
        self.weights.iter().all(InnerProduct::is_diagonal)
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.max_degree() {
            return Err(Error::DegreeOutOfRange {
                degree: n,
                min: 0,
                max: self.max_degree(),
            });
        }
        Ok(())
    }

    pub fn check_signal(&self, s: &Signal) -> Result<()> {
        self.check_degree(s.degree)?;
        if s.len() != self.dim(s.degree) {
            return Err(Error::SignalLength {
                degree: s.degree,
                expected: self.dim(s.degree),
                actual: s.len(),
            });
        }
        Ok(())
    }

    /// Matrix of the adjoint `∂_n† = W_n^{-1} ∂_n^T W_{n-1}`, a map
    /// `C_{n-1} -> C_n`.
    pub fn adjoint_boundary(&self, n: usize) -> Result<Mat> {
        if n == 0 || n > self.max_degree() {
            return Err(Error::DegreeOutOfRange {
                degree: n,
                min: 1,
                max: self.max_degree(),
            });
        }
        Ok(self.adjoint_of(n, n - 1, &self.boundary_dense(n)))
    }

    /// W-adjoint of a map `f : C_from -> C_to` given as a dense matrix.
    pub fn adjoint_of(&self, from: usize, to: usize, f: &Mat) -> Mat {
        let rhs = f.transpose() * self.weight_matrix(to);
        self.weights[from].solve(&rhs)
    }

    /// `⟨x, y⟩_n`.
    pub fn inner_product(&self, n: usize, x: &Signal, y: &Signal) -> Result<f64> {
        for s in [x, y] {
            if s.degree != n {
                return Err(Error::DegreeMismatch {
                    expected: n,
                    actual: s.degree,
                });
            }
            self.check_signal(s)?;
        }
        Ok(self.weights[n].inner(&x.values, &y.values))
    }

    pub fn norm(&self, n: usize, x: &Signal) -> Result<f64> {
        Ok(self.inner_product(n, x, x)?.max(0.0).sqrt())
    }

    /// Norm of a raw coordinate vector in degree `n`.
    pub fn vector_norm(&self, n: usize, x: &Vector) -> f64 {
        self.weights[n].norm(x)
    }

    /// Betti numbers over the reals via numerical rank counting.
    pub fn betti_numbers(&self) -> Vec<usize> {
        let ranks: Vec<usize> = (0..=self.max_degree() + 1)
            .map(|n| linalg::rank(&self.boundary_dense(n)))
            .collect();
        (0..=self.max_degree())
            .map(|n| self.dim(n) - ranks[n] - ranks[n + 1])
            .collect()
    }

    /// Check `∂∂ = 0`, inner-product symmetry and positive definiteness, and
    /// index consistency. Never fails; all problems land in the report.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for n in 1..=self.max_degree() {
            let b = &self.boundary[n];
            if b.nrows() != self.dim(n - 1) || b.ncols() != self.dim(n) {
                violations.push(Violation {
                    check: "index-consistency".into(),
                    location: format!("boundary {n}"),
                    magnitude: 0.0,
                });
                continue;
            }
            for (r, c, v) in b.triplets() {
                if !v.is_finite() {
                    violations.push(Violation {
                        check: "non-finite-coefficient".into(),
                        location: format!("({}, {})", self.names[n][c], self.names[n - 1][r]),
                        magnitude: v,
                    });
                }
            }
        }
        for n in 1..self.max_degree() {
            let lower = &self.boundary[n];
            let upper = &self.boundary[n + 1];
            let tol = BOUNDARY_TOL * (1.0 + lower.max_abs() * upper.max_abs());
            for (r, c, v) in lower.mul(upper).triplets() {
                if v.abs() > tol {
                    violations.push(Violation {
                        check: "boundary-squared".into(),
                        location: format!("({}, {})", self.names[n + 1][c], self.names[n - 1][r]),
                        magnitude: v.abs(),
                    });
                }
            }
        }
        for (n, ip) in self.weights.iter().enumerate() {
            if ip.dim() != self.dim(n) {
                violations.push(Violation {
                    check: "index-consistency".into(),
                    location: format!("inner product {n}"),
                    magnitude: 0.0,
                });
                continue;
            }
            let w = ip.matrix();
            let asym = linalg::max_abs(&(&w - w.transpose()));
            if asym > SYMMETRY_TOL * linalg::max_abs(&w).max(1.0) {
                violations.push(Violation {
                    check: "inner-product-symmetric".into(),
                    location: format!("degree {n}"),
                    magnitude: asym,
                });
            }
            if w.nrows() > 0 {
                let lmin = linalg::min_eigenvalue(&w);
                if !(lmin > SPD_TOL * w.trace().abs()) {
                    violations.push(Violation {
                        check: "inner-product-positive-definite".into(),
                        location: format!("degree {n}"),
                        magnitude: lmin,
                    });
                }
            }
        }
        ValidationReport::new(violations)
    }

    /// Restrict to the listed cells (sorted indices per degree), replacing the
    /// boundary by `boundary` and restricting the inner products.
    pub(crate) fn with_cells(
        &self,
        keep: &[Vec<usize>],
        boundary: Vec<SparseMatrix>,
    ) -> BasedChainComplex {
        let names = keep
            .iter()
            .enumerate()
            .map(|(d, idx)| idx.iter().map(|&i| self.names[d][i].clone()).collect())
            .collect();
        let weights = keep
            .iter()
            .enumerate()
            .map(|(d, idx)| self.weights[d].restrict(idx))
            .collect();
        BasedChainComplex::new(names, boundary, Some(weights)).expect("restriction is well formed")
    }

    /// Replace the inner products.
    pub fn with_inner_products(mut self, weights: Vec<InnerProduct>) -> Result<Self> {
        let rebuilt = BasedChainComplex::new(
            std::mem::take(&mut self.names),
            std::mem::take(&mut self.boundary),
            Some(weights),
        )?;
        Ok(rebuilt)
    }
}

fn simplex_name(s: &[usize]) -> String {
    let body = s
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("_");
    match s.len() {
        1 => format!("v{body}"),
        2 => format!("e{body}"),
        3 => format!("t{body}"),
        k => format!("s{}:{body}", k - 1),
    }
}

/// Incremental construction of a complex by named cells and incidences.
#[derive(Debug, Default)]
pub struct ComplexBuilder {
    names: Vec<Vec<String>>,
    incidences: Vec<(CellId, CellId, f64)>,
    weights: Vec<Option<InnerProduct>>,
}

impl ComplexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cell(&mut self, degree: usize, name: impl Into<String>) -> CellId {
        if self.names.len() <= degree {
            self.names.resize(degree + 1, Vec::new());
        }
        self.names[degree].push(name.into());
        CellId::new(degree, self.names[degree].len() - 1)
    }

    /// Set `∂_{β,α} = coeff`.
    pub fn incidence(&mut self, alpha: CellId, beta: CellId, coeff: f64) -> &mut Self {
        self.incidences.push((alpha, beta, coeff));
        self
    }

    pub fn inner_product(&mut self, degree: usize, ip: InnerProduct) -> &mut Self {
        if self.weights.len() <= degree {
            self.weights.resize(degree + 1, None);
        }
        self.weights[degree] = Some(ip);
        self
    }

    pub fn build(&self) -> Result<BasedChainComplex> {
        let top = self.names.len().max(1);
        let names = {
            let mut n = self.names.clone();
            n.resize(top, Vec::new());
            n
        };
        let mut triples: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); top];
        for &(a, b, c) in &self.incidences {
            if a.degree == 0 || b.degree + 1 != a.degree || a.degree >= top {
                return Err(Error::Config(format!(
                    "incidence from {a} to {b} does not lower degree by one"
                )));
            }
            triples[a.degree].push((b.index, a.index, c));
        }
        let boundaries = (1..top)
            .map(|n| SparseMatrix::from_triplets(names[n - 1].len(), names[n].len(), &triples[n]))
            .collect();
        let weights = if self.weights.iter().all(Option::is_none) {
            None
        } else {
            Some(
                (0..top)
                    .map(|n| {
                        self.weights
                            .get(n)
                            .cloned()
                            .flatten()
                            .unwrap_or_else(|| InnerProduct::identity(names[n].len()))
                    })
                    .collect(),
            )
        };
        BasedChainComplex::new(names, boundaries, weights)
    }
}
