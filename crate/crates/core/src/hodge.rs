//! Combinatorial Laplacians, Hodge decomposition and Hodge bases.
//!
//! Adjoints are taken with respect to the degree-wise inner products, which
//! makes `Δ_n` non-symmetric as a raw matrix whenever `W_n` is not a multiple
//! of the identity. All spectral work therefore happens in the frame
//! `y = W_n^{1/2} x`, where the inner product is Euclidean, and results are
//! mapped back with `W_n^{-1/2}`.

use serde::Serialize;

use crate::complex::{BasedChainComplex, CellId, InnerProduct, Signal, SparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::morse::{self, Matching, Retraction};

fn check_degree(c: &BasedChainComplex, n: usize) -> Result<()> {
    if n > c.max_degree() {
        return Err(Error::DegreeOutOfRange {
            degree: n,
            min: 0,
            max: c.max_degree(),
        });
    }
    Ok(())
}

/// `Δ_n^+ = ∂_{n+1} ∂_{n+1}†`.
pub fn up_laplacian(c: &BasedChainComplex, n: usize) -> Result<Mat> {
    check_degree(c, n)?;
    if n == c.max_degree() {
        return Ok(Mat::zeros(c.dim(n), c.dim(n)));
    }
    let b = c.boundary_dense(n + 1);
    Ok(&b * c.adjoint_of(n + 1, n, &b))
}

/// `Δ_n^- = ∂_n† ∂_n`.
pub fn down_laplacian(c: &BasedChainComplex, n: usize) -> Result<Mat> {
    check_degree(c, n)?;
    if n == 0 {
        return Ok(Mat::zeros(c.dim(0), c.dim(0)));
    }
    let b = c.boundary_dense(n);
    Ok(c.adjoint_of(n, n - 1, &b) * b)
}

/// `Δ_n = ∂_n† ∂_n + ∂_{n+1} ∂_{n+1}†`.
pub fn laplacian(c: &BasedChainComplex, n: usize) -> Result<Mat> {
    Ok(up_laplacian(c, n)? + down_laplacian(c, n)?)
}

/// The three orthogonal Hodge components of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeDecomposition {
    pub degree: usize,
    /// Component in `Im ∂_{n+1}`.
    pub im_d: Signal,
    /// Component in `Ker Δ_n`.
    pub ker: Signal,
    /// Component in `Im ∂_n†`.
    pub im_dt: Signal,
}

impl HodgeDecomposition {
    /// Projection onto `Ker ∂_{n+1}† = Ker Δ_n ⊕ Im ∂_n†` (the cocycle part).
    pub fn ker_coboundary(&self) -> Signal {
        Signal::from_vector(self.degree, &self.ker.values + &self.im_dt.values)
    }

    /// Projection onto `Ker ∂_n = Im ∂_{n+1} ⊕ Ker Δ_n` (the cycle part).
    pub fn ker_boundary(&self) -> Signal {
        Signal::from_vector(self.degree, &self.ker.values + &self.im_d.values)
    }

    pub fn reconstruct(&self) -> Signal {
        Signal::from_vector(
            self.degree,
            &self.im_d.values + &self.ker.values + &self.im_dt.values,
        )
    }
}

/// Precomputed orthogonal projectors for one degree. Reuse it when
/// decomposing many signals on the same complex.
#[derive(Debug, Clone)]
pub struct HodgeProjector {
    degree: usize,
    sqrt_w: Mat,
    inv_sqrt_w: Mat,
    /// Frame-orthonormal basis of `Im ∂_{n+1}`.
    up: Mat,
    /// Frame-orthonormal basis of `Im ∂_n†`.
    down: Mat,
}

impl HodgeProjector {
    pub fn new(c: &BasedChainComplex, n: usize) -> Result<Self> {
        check_degree(c, n)?;
        let (sqrt_w, inv_sqrt_w) = linalg::spd_sqrt_pair(&c.weight_matrix(n));
        let up = linalg::column_space(&(&sqrt_w * c.boundary_dense(n + 1)));
        let down = if n == 0 {
            Mat::zeros(c.dim(0), 0)
        } else {
            let b = c.boundary_dense(n);
            linalg::column_space(&(&inv_sqrt_w * b.transpose() * c.weight_matrix(n - 1)))
        };
        Ok(HodgeProjector {
            degree: n,
            sqrt_w,
            inv_sqrt_w,
            up,
            down,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rank_up(&self) -> usize {
        self.up.ncols()
    }

    pub fn rank_down(&self) -> usize {
        self.down.ncols()
    }

    fn project(&self, basis: &Mat, x: &Vector) -> Vector {
        let y = &self.sqrt_w * x;
        &self.inv_sqrt_w * (basis * (basis.transpose() * y))
    }

    pub fn decompose(&self, s: &Signal) -> Result<HodgeDecomposition> {
        if s.degree != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                actual: s.degree,
            });
        }
        if s.len() != self.sqrt_w.nrows() {
            return Err(Error::SignalLength {
                degree: s.degree,
                expected: self.sqrt_w.nrows(),
                actual: s.len(),
            });
        }
        let im_d = self.project(&self.up, &s.values);
        let im_dt = self.project(&self.down, &s.values);
        let ker = &s.values - &im_d - &im_dt;
        Ok(HodgeDecomposition {
            degree: self.degree,
            im_d: Signal::from_vector(self.degree, im_d),
            ker: Signal::from_vector(self.degree, ker),
            im_dt: Signal::from_vector(self.degree, im_dt),
        })
    }
}

/// Orthogonal decomposition `C_n = Im ∂_{n+1} ⊕ Ker Δ_n ⊕ Im ∂_n†`.
pub fn hodge_decompose(c: &BasedChainComplex, s: &Signal) -> Result<HodgeDecomposition> {
    c.check_signal(s)?;
    HodgeProjector::new(c, s.degree)?.decompose(s)
}

/// A singular vector with its singular value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularVector {
    pub vector: Vec<f64>,
    pub singular_value: f64,
}

impl SingularVector {
    pub fn as_vector(&self) -> Vector {
        Vector::from_column_slice(&self.vector)
    }
}

/// Hodge basis of one degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeBasis {
    /// `L_+(∂_{n+1})`: orthonormal basis of `Im ∂_{n+1}`.
    pub l_plus: Vec<SingularVector>,
    /// Orthonormal basis of `Ker Δ_n`.
    pub kernel: Vec<Vec<f64>>,
    /// `R_+(∂_n)`: orthonormal basis of `Im ∂_n†`.
    pub r_plus: Vec<SingularVector>,
}

impl DegreeBasis {
    pub fn len(&self) -> usize {
        self.l_plus.len() + self.kernel.len() + self.r_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Which Hodge summand a basis vector spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HodgeComponent {
    ImD,
    Ker,
    ImDt,
}

impl HodgeComponent {
    pub fn label(self) -> &'static str {
        match self {
            HodgeComponent::ImD => "im_d",
            HodgeComponent::Ker => "ker",
            HodgeComponent::ImDt => "im_dt",
        }
    }
}

/// A Hodge basis of the whole complex. `degrees[n].r_plus[i]` is paired with
/// `degrees[n - 1].l_plus[i]`: `∂_n r = σ l` with the shared singular value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HodgeBasis {
    pub degrees: Vec<DegreeBasis>,
}

impl HodgeBasis {
    /// All basis vectors of degree `n` in the order `l_plus, kernel, r_plus`.
    pub fn vectors(&self, n: usize) -> Vec<(HodgeComponent, Vector)> {
        let d = &self.degrees[n];
        d.l_plus
            .iter()
            .map(|v| (HodgeComponent::ImD, v.as_vector()))
            .chain(
                d.kernel
                    .iter()
                    .map(|v| (HodgeComponent::Ker, Vector::from_column_slice(v))),
            )
            .chain(d.r_plus.iter().map(|v| (HodgeComponent::ImDt, v.as_vector())))
            .collect()
    }

    /// Change-of-basis matrix whose columns are [`vectors`](Self::vectors).
    pub fn matrix(&self, n: usize, dim: usize) -> Mat {
        let vs = self.vectors(n);
        let mut q = Mat::zeros(dim, vs.len());
        for (j, (_, v)) in vs.iter().enumerate() {
            q.set_column(j, v);
        }
        q
    }

    pub fn kernel_dims(&self) -> Vec<usize> {
        self.degrees.iter().map(|d| d.kernel.len()).collect()
    }
}

/// Flip `w` and its partner `v` so the first nonzero entry of `w` is
/// positive. Returns whether a flip happened.
fn first_nonzero_positive(w: &mut Vector, v: &mut Vector) -> bool {
    let scale = w.amax();
    match w.iter().find(|x| x.abs() > 1e-12 * scale) {
        Some(&x) if x < 0.0 => {
            w.neg_mut();
            v.neg_mut();
            true
        }
        _ => false,
    }
}

/// Compute a Hodge basis: per degree, W-orthonormal bases of the three Hodge
/// summands built from the singular value decompositions of the boundaries.
/// Singular values are sorted descending; the first nonzero coordinate of
/// every `L_+` vector is positive.
pub fn hodge_basis(c: &BasedChainComplex) -> Result<HodgeBasis> {
    let top = c.max_degree();
    let frames: Vec<(Mat, Mat)> = (0..=top)
        .map(|n| linalg::spd_sqrt_pair(&c.weight_matrix(n)))
        .collect();
    let mut degrees: Vec<DegreeBasis> = (0..=top)
        .map(|_| DegreeBasis {
            l_plus: Vec::new(),
            kernel: Vec::new(),
            r_plus: Vec::new(),
        })
        .collect();
    // frame-orthonormal vectors used in each degree, for the kernel complement
    let mut frame_used: Vec<Vec<Vector>> = vec![Vec::new(); top + 1];
    for n in 1..=top {
        let a = &frames[n - 1].0 * c.boundary_dense(n) * &frames[n].1;
        let svd = linalg::thin_svd(&a);
        for (i, &sigma) in svd.sigma.iter().enumerate() {
            let mut u: Vector = svd.u.column(i).into_owned();
            let mut v: Vector = svd.v.column(i).into_owned();
            let mut w = &frames[n - 1].1 * &u;
            let mut r = &frames[n].1 * &v;
            if first_nonzero_positive(&mut w, &mut r) {
                u.neg_mut();
                v.neg_mut();
            }
            frame_used[n - 1].push(u);
            frame_used[n].push(v);
            degrees[n - 1].l_plus.push(SingularVector {
                vector: w.iter().copied().collect(),
                singular_value: sigma,
            });
            degrees[n].r_plus.push(SingularVector {
                vector: r.iter().copied().collect(),
                singular_value: sigma,
            });
        }
    }
    for n in 0..=top {
        let dim = c.dim(n);
        let mut q = Mat::zeros(dim, frame_used[n].len());
        for (j, v) in frame_used[n].iter().enumerate() {
            q.set_column(j, v);
        }
        let k = linalg::orthogonal_complement(&q, dim);
        let expected = dim - q.ncols();
        let residual = if q.ncols() > 0 && k.ncols() > 0 {
            linalg::max_abs(&(q.transpose() * &k))
        } else {
            0.0
        };
        if k.ncols() != expected || residual > 1e-8 {
            return Err(Error::Eigensolver {
                degree: n,
                residual: residual.max((expected as f64 - k.ncols() as f64).abs()),
            });
        }
        degrees[n].kernel = (0..k.ncols())
            .map(|j| (&frames[n].1 * k.column(j)).iter().copied().collect())
            .collect();
    }
    Ok(HodgeBasis { degrees })
}

/// The Hodge matching and the Morse reduction it induces.
#[derive(Debug, Clone)]
pub struct HodgeMatching {
    /// The complex rewritten in the Hodge base (cells `im_d.n.i`, `ker.n.i`,
    /// `im_dt.n.i`), with identity inner products.
    pub rebased: BasedChainComplex,
    /// Columns are the Hodge basis vectors of each degree in original
    /// coordinates.
    pub basis_change: Vec<Mat>,
    /// Pairs `R_+(∂_n) -> L_+(∂_n)` in the rebased complex.
    pub matching: Matching,
    pub retraction: Retraction,
    /// `max_n max|K_{n-1}^T W ∂_n K_n|` over the harmonic bases, computed
    /// without any thresholding.
    pub boundary_residual: f64,
}

impl HodgeMatching {
    /// Critical cells per degree (equal to `dim Ker Δ_n`).
    pub fn critical_counts(&self) -> Vec<usize> {
        self.retraction.reduced.dims()
    }
}

/// Rewrite `c` in the base given by the columns of `q[n]` (a basis of `C_n`
/// for each degree). Boundary entries at or below
/// `1e-10 * max|∂'| * max(dim)` are treated as zero.
pub fn rebase(
    c: &BasedChainComplex,
    q: &[Mat],
    names: Vec<Vec<String>>,
    weights: Option<Vec<InnerProduct>>,
) -> Result<BasedChainComplex> {
    let top = c.max_degree();
    let mut boundaries = Vec::with_capacity(top);
    for n in 1..=top {
        let inv = linalg::inverse(&q[n - 1])
            .ok_or_else(|| Error::Config(format!("basis of degree {} is singular", n - 1)))?;
        let b = inv * c.boundary_dense(n) * &q[n];
        let scale = linalg::max_abs(&b);
        let chop = linalg::zero_threshold(scale, b.nrows(), b.ncols());
        boundaries.push(SparseMatrix::from_dense(&b, chop));
    }
    let weights = match weights {
        Some(w) => w,
        None => (0..=top)
            .map(|n| {
                let w = q[n].transpose() * c.weight_matrix(n) * &q[n];
                let w = (&w + w.transpose()) * 0.5;
                if linalg::is_diagonal(&w) {
                    InnerProduct::Diagonal(w.diagonal().iter().copied().collect())
                } else {
                    InnerProduct::Dense(w)
                }
            })
            .collect(),
    };
    BasedChainComplex::new(names, boundaries, Some(weights))
}

/// Pair every `R_+(∂_n)` vector with its `L_+(∂_n)` partner and reduce. The
/// critical cells are exactly the harmonic basis vectors and the induced
/// Morse boundary vanishes.
pub fn hodge_matching(c: &BasedChainComplex, basis: &HodgeBasis) -> Result<HodgeMatching> {
    let top = c.max_degree();
    if basis.degrees.len() != top + 1 {
        return Err(Error::Config("Hodge basis does not match the complex".into()));
    }
    let q: Vec<Mat> = (0..=top).map(|n| basis.matrix(n, c.dim(n))).collect();
    let names: Vec<Vec<String>> = (0..=top)
        .map(|n| {
            basis
                .vectors(n)
                .iter()
                .scan([0usize; 3], |counts, (kind, _)| {
                    let slot = *kind as usize;
                    let i = counts[slot];
                    counts[slot] += 1;
                    Some(format!("{}.{n}.{i}", kind.label()))
                })
                .collect()
        })
        .collect();
    let rebased = rebase(
        c,
        &q,
        names,
        Some((0..=top).map(|n| InnerProduct::identity(c.dim(n))).collect()),
    )?;
    let mut pairs = Vec::new();
    for n in 1..=top {
        let l_offset = 0;
        let r_offset = basis.degrees[n].l_plus.len() + basis.degrees[n].kernel.len();
        for i in 0..basis.degrees[n].r_plus.len() {
            pairs.push((
                CellId::new(n, r_offset + i),
                CellId::new(n - 1, l_offset + i),
            ));
        }
    }
    let matching = Matching::new(pairs);
    let retraction = morse::reduce(&rebased, &matching)?;
    let mut boundary_residual = 0.0_f64;
    for n in 1..=top {
        let kn = kernel_matrix(&basis.degrees[n], c.dim(n));
        let km = kernel_matrix(&basis.degrees[n - 1], c.dim(n - 1));
        if kn.ncols() > 0 && km.ncols() > 0 {
            let r = km.transpose() * c.weight_matrix(n - 1) * c.boundary_dense(n) * kn;
            boundary_residual = boundary_residual.max(linalg::max_abs(&r));
        }
    }
    Ok(HodgeMatching {
        rebased,
        basis_change: q,
        matching,
        retraction,
        boundary_residual,
    })
}

fn kernel_matrix(d: &DegreeBasis, dim: usize) -> Mat {
    let mut k = Mat::zeros(dim, d.kernel.len());
    for (j, v) in d.kernel.iter().enumerate() {
        k.set_column(j, &Vector::from_column_slice(v));
    }
    k
}
