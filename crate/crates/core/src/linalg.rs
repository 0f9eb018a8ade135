//! Dense numerical helpers shared by the spectral and Morsification code.
//!
//! All rank decisions go through [`zero_threshold`]: a singular value is
//! treated as zero when it is at most `1e-10 * sigma_max * max(rows, cols)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative factor of the numerical-rank cut.
pub const RANK_TOL: f64 = 1e-10;

pub fn zero_threshold(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    RANK_TOL * sigma_max * rows.max(cols).max(1) as f64
}

/// The nonzero part of a singular value decomposition `A = U diag(sigma) V^T`,
/// sorted by descending singular value.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

pub fn thin_svd(a: &Mat) -> ThinSvd {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 || max_abs(a) == 0.0 {
        return ThinSvd {
            u: Mat::zeros(rows, 0),
            sigma: Vec::new(),
            v: Mat::zeros(cols, 0),
        };
    }
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = m.thin_svd().expect("singular value decomposition converges");
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let values: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sigma_max = values[order[0]];
    let cut = zero_threshold(sigma_max, rows, cols);
    let keep: Vec<usize> = order.into_iter().filter(|&i| values[i] > cut).collect();
    let mut uu = Mat::zeros(rows, keep.len());
    let mut vv = Mat::zeros(cols, keep.len());
    let mut sigma = Vec::with_capacity(keep.len());
    for (k, &i) in keep.iter().enumerate() {
        for r in 0..rows {
            uu[(r, k)] = u[(r, i)];
        }
        for r in 0..cols {
            vv[(r, k)] = v[(r, i)];
        }
        sigma.push(values[i]);
    }
    ThinSvd { u: uu, sigma, v: vv }
}

pub fn rank(a: &Mat) -> usize {
    thin_svd(a).rank()
}

/// Orthonormal basis (Euclidean) of the column space of `a`.
pub fn column_space(a: &Mat) -> Mat {
    thin_svd(a).u
}

/// Orthonormal basis (Euclidean) of the orthogonal complement of the span of
/// the orthonormal columns `q` inside `R^dim`.
pub fn orthogonal_complement(q: &Mat, dim: usize) -> Mat {
    let want = dim - q.ncols();
    if want == 0 {
        return Mat::zeros(dim, 0);
    }
    let mut p = Mat::identity(dim, dim);
    if q.ncols() > 0 {
        p -= q * q.transpose();
    }
    let eig = SymmetricEigen::new(p);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut out = Mat::zeros(dim, want);
    for (k, &i) in order.iter().take(want).enumerate() {
        out.set_column(k, &eig.eigenvectors.column(i));
    }
    modified_gram_schmidt(&out)
}

/// Modified Gram-Schmidt on the columns of `a`. Columns that collapse to
/// numerical zero are dropped.
pub fn modified_gram_schmidt(a: &Mat) -> Mat {
    let mut cols: Vec<Vector> = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let mut v: Vector = a.column(j).into_owned();
        let start = v.norm();
        for q in &cols {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let n = v.norm();
        if n > 1e-12 * start.max(1e-300) {
            cols.push(v / n);
        }
    }
    let mut out = Mat::zeros(a.nrows(), cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `max|a - b| / max(1, max|a|, max|b|)`.
pub fn rel_residual(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in residual");
    let scale = 1.0_f64.max(max_abs(a)).max(max_abs(b));
    max_abs(&(a - b)) / scale
}

pub fn is_diagonal(a: &Mat) -> bool {
    a.iter()
        .enumerate()
        .all(|(k, &x)| x == 0.0 || k / a.nrows() == k % a.nrows())
}

/// Symmetric square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(w: &Mat) -> (Mat, Mat) {
    let n = w.nrows();
    if is_diagonal(w) {
        let d = w.diagonal();
        let s = Mat::from_diagonal(&d.map(f64::sqrt));
        let si = Mat::from_diagonal(&d.map(|x| 1.0 / x.sqrt()));
        return (s, si);
    }
    let eig = SymmetricEigen::new(w.clone());
    let q = &eig.eigenvectors;
    let mut s = Mat::zeros(n, n);
    let mut si = Mat::zeros(n, n);
    for i in 0..n {
        let l = eig.eigenvalues[i].max(0.0);
        let qi = q.column(i);
        s += (qi * qi.transpose()) * l.sqrt();
        si += (qi * qi.transpose()) / l.sqrt();
    }
    (s, si)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Solve `a x = b` for SPD or general square `a`.
pub fn solve(a: &Mat, b: &Mat) -> Option<Mat> {
    if a.nrows() == 0 {
        return Some(Mat::zeros(0, b.ncols()));
    }
    if is_diagonal(a) {
        let mut out = b.clone();
        for i in 0..a.nrows() {
            let d = a[(i, i)];
            if d == 0.0 {
                return None;
            }
            out.row_mut(i).scale_mut(1.0 / d);
        }
        return Some(out);
    }
    a.clone().lu().solve(b)
}

pub fn inverse(a: &Mat) -> Option<Mat> {
    solve(a, &Mat::identity(a.nrows(), a.nrows()))
}

/// Restrict a square matrix to the given (sorted) indices.
pub fn principal_submatrix(a: &Mat, keep: &[usize]) -> Mat {
    Mat::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])])
}

/// Select rows of a matrix.
pub fn select_rows(a: &Mat, keep: &[usize]) -> Mat {
    Mat::from_fn(keep.len(), a.ncols(), |i, j| a[(keep[i], j)])
}

/// Select columns of a matrix.
pub fn select_cols(a: &Mat, keep: &[usize]) -> Mat {
    Mat::from_fn(a.nrows(), keep.len(), |i, j| a[(i, keep[j])])
}
