//! Morsification: every deformation retract is a Morse retraction in a
//! suitable base.
//!
//! `ΦΨ` is a projection, so `C = Ker Ψ ⊕ Im Φ` as chain complexes and
//! `Ker Ψ` is acyclic. A Hodge matching on `Ker Ψ` plus the trivial matching
//! on `Im Φ` gives a Morse matching whose retraction reproduces `ΦΨ`.

use serde::Serialize;

use crate::complex::{BasedChainComplex, CellId, InnerProduct, SparseMatrix};
use crate::error::{Error, Result};
use crate::hodge::{self, HodgeComponent};
use crate::linalg::{self, Mat};
use crate::morse::{self, Matching, Retraction, SequentialMatching};

/// Tolerance for `ΨΦ = 1`.
pub const SECTION_TOL: f64 = 1e-10;
/// Tolerance for the chain-map, projection and splitting identities.
pub const CHAIN_TOL: f64 = 1e-9;
/// Tolerance for the operator equality of the Morsification.
pub const OPERATOR_TOL: f64 = 1e-8;

/// A deformation retract of `source` onto a complex `D` with boundary
/// `target_boundary`.
#[derive(Debug, Clone)]
pub struct DeformationRetract {
    pub source: BasedChainComplex,
    /// `target_boundary[n]: D_n -> D_{n-1}`; entry 0 has no rows.
    pub target_boundary: Vec<Mat>,
    pub psi: Vec<Mat>,
    pub phi: Vec<Mat>,
    pub h: Option<Vec<Mat>>,
}

impl From<&Retraction> for DeformationRetract {
    fn from(r: &Retraction) -> Self {
        DeformationRetract {
            source: r.source.clone(),
            target_boundary: (0..=r.reduced.max_degree())
                .map(|n| r.reduced.boundary_dense(n))
                .collect(),
            psi: r.psi.clone(),
            phi: r.phi.clone(),
            h: Some(r.h.clone()),
        }
    }
}

impl DeformationRetract {
    /// The identity retract of a complex onto itself.
    pub fn identity(c: &BasedChainComplex) -> Self {
        let top = c.max_degree();
        DeformationRetract {
            source: c.clone(),
            target_boundary: (0..=top).map(|n| c.boundary_dense(n)).collect(),
            psi: (0..=top).map(|n| Mat::identity(c.dim(n), c.dim(n))).collect(),
            phi: (0..=top).map(|n| Mat::identity(c.dim(n), c.dim(n))).collect(),
            h: None,
        }
    }

    pub fn max_degree(&self) -> usize {
        self.source.max_degree()
    }

    /// `ΦΨ` in degree `n`.
    pub fn projector(&self, n: usize) -> Mat {
        &self.phi[n] * &self.psi[n]
    }

    /// Check `ΨΦ = 1`, the chain-map identities and `(ΦΨ)² = ΦΨ`.
    pub fn check(&self) -> Result<()> {
        let top = self.max_degree();
        if self.psi.len() != top + 1 || self.phi.len() != top + 1 {
            return Err(Error::InvalidRetract("one map per degree expected".into()));
        }
        for n in 0..=top {
            let k = self.psi[n].nrows();
            let bad_shape = self.psi[n].ncols() != self.source.dim(n)
                || self.phi[n].shape() != (self.source.dim(n), k);
            if bad_shape {
                return Err(Error::InvalidRetract(format!("maps of degree {n} have wrong shapes")));
            }
            let r = linalg::rel_residual(&(&self.psi[n] * &self.phi[n]), &Mat::identity(k, k));
            if r > SECTION_TOL {
                return Err(Error::InvalidRetract(format!("ΨΦ ≠ 1 in degree {n} (residual {r:e})")));
            }
            let p = self.projector(n);
            let r = linalg::rel_residual(&(&p * &p), &p);
            if r > CHAIN_TOL {
                return Err(Error::InvalidRetract(format!("ΦΨ is not a projection in degree {n} (residual {r:e})")));
            }
            if n >= 1 {
                let d = self.source.boundary_dense(n);
                let dd = &self.target_boundary[n];
                let r = linalg::rel_residual(&(&self.psi[n - 1] * &d), &(dd * &self.psi[n]));
                let s = linalg::rel_residual(&(&d * &self.phi[n]), &(&self.phi[n - 1] * dd));
                if r.max(s) > CHAIN_TOL {
                    return Err(Error::InvalidRetract(format!(
                        "Ψ or Φ is not a chain map in degree {n} (residual {:e})",
                        r.max(s)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `W`-orthonormal bases of `Ker Ψ` and `Im Φ` (as columns), per degree.
#[derive(Debug, Clone)]
pub struct Split {
    pub ker_psi: Vec<Mat>,
    pub im_phi: Vec<Mat>,
    /// Largest relative residual of `∂` leaving either subspace.
    pub closure_residual: f64,
}

impl Split {
    pub fn ker_dims(&self) -> Vec<usize> {
        self.ker_psi.iter().map(Mat::ncols).collect()
    }

    pub fn im_dims(&self) -> Vec<usize> {
        self.im_phi.iter().map(Mat::ncols).collect()
    }
}

fn w_orthonormal_column_space(a: &Mat, sqrt_w: &Mat, inv_sqrt_w: &Mat) -> Mat {
    inv_sqrt_w * linalg::column_space(&(sqrt_w * a))
}

/// Relative size of the part of `∂ B_n` outside `span B_{n-1}`, for
/// `W`-orthonormal `B`.
fn closure(d: &Mat, b_hi: &Mat, b_lo: &Mat, w_lo: &Mat) -> f64 {
    if b_hi.ncols() == 0 {
        return 0.0;
    }
    let img = d * b_hi;
    let inside = if b_lo.ncols() == 0 {
        Mat::zeros(img.nrows(), img.ncols())
    } else {
        b_lo * (b_lo.transpose() * w_lo * &img)
    };
    linalg::rel_residual(&img, &inside)
}

/// Split `C = Ker Ψ ⊕ Im Φ`: `Ker Ψ` is the column space of `1 - ΦΨ` and
/// `Im Φ` that of `ΦΨ`.
pub fn split_retract(r: &DeformationRetract) -> Result<Split> {
    r.check()?;
    let c = &r.source;
    let top = c.max_degree();
    let mut ker_psi = Vec::with_capacity(top + 1);
    let mut im_phi = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let (s, si) = linalg::spd_sqrt_pair(&c.weight_matrix(n));
        let p = r.projector(n);
        let dim = c.dim(n);
        let k = w_orthonormal_column_space(&(Mat::identity(dim, dim) - &p), &s, &si);
        let j = w_orthonormal_column_space(&p, &s, &si);
        if k.ncols() + j.ncols() != dim {
            return Err(Error::InvalidRetract(format!(
                "Ker Ψ and Im Φ have dimensions {} + {} in degree {n} of dimension {dim}",
                k.ncols(),
                j.ncols()
            )));
        }
        ker_psi.push(k);
        im_phi.push(j);
    }
    let mut closure_residual = 0.0_f64;
    for n in 1..=top {
        let d = c.boundary_dense(n);
        let w = c.weight_matrix(n - 1);
        closure_residual = closure_residual
            .max(closure(&d, &ker_psi[n], &ker_psi[n - 1], &w))
            .max(closure(&d, &im_phi[n], &im_phi[n - 1], &w));
    }
    if closure_residual > CHAIN_TOL {
        return Err(Error::InvalidRetract(format!(
            "the splitting is not closed under the boundary (residual {closure_residual:e})"
        )));
    }
    Ok(Split {
        ker_psi,
        im_phi,
        closure_residual,
    })
}

/// Pair counts per degree: `plus[n] = |M⁺_n|` (bottom cells of degree `n`),
/// `minus[n] = |M⁻_n|` (top cells of degree `n`) and `zero[n] = |M⁰_n|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub zero: Vec<usize>,
}

/// Anything made of `(α, β)` pairs over a complex of known dimensions.
pub trait PairStructure {
    fn starts_in(&self, n: usize) -> usize;
    fn ends_in(&self, n: usize) -> usize;
}

impl PairStructure for Matching {
    fn starts_in(&self, n: usize) -> usize {
        Matching::starts_in(self, n)
    }
    fn ends_in(&self, n: usize) -> usize {
        Matching::ends_in(self, n)
    }
}

impl PairStructure for SequentialMatching {
    fn starts_in(&self, n: usize) -> usize {
        SequentialMatching::starts_in(self, n)
    }
    fn ends_in(&self, n: usize) -> usize {
        SequentialMatching::ends_in(self, n)
    }
}

impl PairStructure for Morsification {
    fn starts_in(&self, n: usize) -> usize {
        self.matching.starts_in(n)
    }
    fn ends_in(&self, n: usize) -> usize {
        self.matching.ends_in(n)
    }
}

/// Pair-count table of a matching structure on a complex with cell counts
/// `dims`.
pub fn pair_counts<P: PairStructure>(p: &P, dims: &[usize]) -> PairCounts {
    let plus: Vec<usize> = (0..dims.len()).map(|n| p.ends_in(n)).collect();
    let minus: Vec<usize> = (0..dims.len()).map(|n| p.starts_in(n)).collect();
    let zero = (0..dims.len()).map(|n| dims[n] - plus[n] - minus[n]).collect();
    PairCounts { plus, minus, zero }
}

/// True when no pair matches an `n`-cell down to an `(n-1)`-cell.
pub fn is_free<P: PairStructure>(p: &P, n: usize) -> bool {
    p.starts_in(n) == 0
}

/// The Morsification of a deformation retract.
#[derive(Debug, Clone)]
pub struct Morsification {
    pub split: Split,
    /// Columns: the Hodge base of `Ker Ψ` followed by the base of `Im Φ`, in
    /// source coordinates.
    pub basis_change: Vec<Mat>,
    /// The source complex rewritten in that base.
    pub rebased: BasedChainComplex,
    /// Hodge matching on `Ker Ψ`; every `Ker Ψ` basis vector is matched.
    pub matching: Matching,
    pub retraction: Retraction,
    /// Relative Frobenius distance between `Q Φ^𝓜 Ψ^𝓜 Q⁻¹` and `ΦΨ`,
    /// maximised over degrees.
    pub operator_residual: f64,
    /// Largest cosine between `Ker Ψ` and `Im Φ` (zero iff orthogonal).
    pub orthogonality_defect: f64,
}

fn frobenius_rel(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Morsify a deformation retract.
pub fn morsify(r: &DeformationRetract) -> Result<Morsification> {
    let split = split_retract(r)?;
    let c = &r.source;
    let top = c.max_degree();
    // Ker Ψ as a complex in the coordinates of its W-orthonormal basis.
    let names: Vec<Vec<String>> = (0..=top)
        .map(|n| (0..split.ker_psi[n].ncols()).map(|i| format!("k.{n}.{i}")).collect())
        .collect();
    let mut boundaries = Vec::with_capacity(top);
    for n in 1..=top {
        let (hi, lo) = (&split.ker_psi[n], &split.ker_psi[n - 1]);
        let b = lo.transpose() * c.weight_matrix(n - 1) * c.boundary_dense(n) * hi;
        let chop = linalg::zero_threshold(linalg::max_abs(&b), b.nrows(), b.ncols());
        boundaries.push(SparseMatrix::from_dense(&b, chop));
    }
    let kernel = BasedChainComplex::new(
        names,
        boundaries,
        Some((0..=top).map(|n| InnerProduct::identity(split.ker_psi[n].ncols())).collect()),
    )?;
    let basis = hodge::hodge_basis(&kernel)?;
    let harmonic: usize = basis.kernel_dims().iter().sum();
    if harmonic != 0 {
        return Err(Error::InvalidRetract(format!(
            "Ker Ψ has {harmonic} homology classes; it must be acyclic"
        )));
    }
    let mut q = Vec::with_capacity(top + 1);
    let mut cell_names = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let kh = &split.ker_psi[n] * basis.matrix(n, kernel.dim(n));
        let j = &split.im_phi[n];
        let mut m = Mat::zeros(c.dim(n), kh.ncols() + j.ncols());
        m.view_mut((0, 0), (c.dim(n), kh.ncols())).copy_from(&kh);
        m.view_mut((0, kh.ncols()), (c.dim(n), j.ncols())).copy_from(j);
        q.push(m);
        let mut names: Vec<String> = Vec::with_capacity(c.dim(n));
        let (mut li, mut ri) = (0, 0);
        for (kind, _) in basis.vectors(n) {
            match kind {
                HodgeComponent::ImD => {
                    names.push(format!("ker_d.{n}.{li}"));
                    li += 1;
                }
                _ => {
                    names.push(format!("ker_dt.{n}.{ri}"));
                    ri += 1;
                }
            }
        }
        names.extend((0..j.ncols()).map(|i| format!("im.{n}.{i}")));
        cell_names.push(names);
    }
    let rebased = hodge::rebase(c, &q, cell_names, None)?;
    let mut pairs = Vec::new();
    for n in 1..=top {
        let offset = basis.degrees[n].l_plus.len();
        for i in 0..basis.degrees[n].r_plus.len() {
            pairs.push((CellId::new(n, offset + i), CellId::new(n - 1, i)));
        }
    }
    let matching = Matching::new(pairs);
    let retraction = morse::reduce(&rebased, &matching)?;
    let mut operator_residual = 0.0_f64;
    let mut orthogonality_defect = 0.0_f64;
    for n in 0..=top {
        let qi = linalg::inverse(&q[n])
            .ok_or_else(|| Error::InvalidRetract(format!("degenerate base in degree {n}")))?;
        let p = &q[n] * (&retraction.phi[n] * &retraction.psi[n]) * qi;
        operator_residual = operator_residual.max(frobenius_rel(&p, &r.projector(n)));
        let (k, j) = (&split.ker_psi[n], &split.im_phi[n]);
        if k.ncols() > 0 && j.ncols() > 0 {
            let cross = k.transpose() * c.weight_matrix(n) * j;
            orthogonality_defect =
                orthogonality_defect.max(linalg::thin_svd(&cross).sigma.first().copied().unwrap_or(0.0));
        }
    }
    if operator_residual > OPERATOR_TOL {
        return Err(Error::InvalidRetract(format!(
            "Morsification does not reproduce ΦΨ (residual {operator_residual:e})"
        )));
    }
    Ok(Morsification {
        split,
        basis_change: q,
        rebased,
        matching,
        retraction,
        operator_residual,
        orthogonality_defect,
    })
}

/// JSON summary of a Morsification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorsificationReport {
    pub pair_counts: PairCounts,
    pub ker_psi_dims: Vec<usize>,
    pub im_phi_dims: Vec<usize>,
    pub operator_residual: f64,
    pub orthogonality_defect: f64,
}

impl Morsification {
    pub fn max_degree(&self) -> usize {
        self.rebased.max_degree()
    }

    pub fn pair_counts(&self) -> PairCounts {
        pair_counts(self, &self.rebased.dims())
    }

    pub fn is_free(&self, n: usize) -> bool {
        is_free(self, n)
    }

    /// `1 - ΦΨ` in degree `n`, assembled as the sum of inclusion after
    /// projection over the matched cells of the Morsification base.
    pub fn reconstruction_operator(&self, n: usize) -> Mat {
        let q = &self.basis_change[n];
        let mut d = Mat::zeros(q.ncols(), q.ncols());
        for &(a, b) in self.matching.pairs() {
            for cell in [a, b] {
                if cell.degree == n {
                    d[(cell.index, cell.index)] = 1.0;
                }
            }
        }
        let qi = linalg::inverse(q).expect("base is invertible");
        q * d * qi
    }

    pub fn report(&self) -> MorsificationReport {
        MorsificationReport {
            pair_counts: self.pair_counts(),
            ker_psi_dims: self.split.ker_dims(),
            im_phi_dims: self.split.im_dims(),
            operator_residual: self.operator_residual,
            orthogonality_defect: self.orthogonality_defect,
        }
    }
}

/// `1 - ΦΨ` of a morsification, all degrees.
pub fn reconstruction_operator(m: &Morsification) -> Vec<Mat> {
    (0..=m.max_degree()).map(|n| m.reconstruction_operator(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> BasedChainComplex {
        BasedChainComplex::from_simplices(&[&[0, 1, 2]])
    }

    fn single_pair() -> (BasedChainComplex, Retraction) {
        let c = triangle();
        let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
        let r = morse::reduce(&c, &m).unwrap();
        (c, r)
    }

    #[test]
    fn identity_split() {
        let c = triangle();
        let s = split_retract(&DeformationRetract::identity(&c)).unwrap();
        assert_eq!(s.ker_dims(), vec![0, 0, 0]);
        assert_eq!(s.im_dims(), c.dims());
        let m = morsify(&DeformationRetract::identity(&c)).unwrap();
        for op in reconstruction_operator(&m) {
            assert_eq!(linalg::max_abs(&op), 0.0);
        }
    }

    #[test]
    fn single_pair_split() {
        let (_, r) = single_pair();
        let s = split_retract(&(&r).into()).unwrap();
        assert_eq!(s.ker_dims(), vec![0, 1, 1]);
        assert_eq!(s.im_dims(), vec![3, 2, 0]);
    }

    #[test]
    fn single_pair_morsification() {
        let (c, r) = single_pair();
        let m = morsify(&(&r).into()).unwrap();
        assert_eq!(m.matching.len(), 1);
        assert_eq!(m.matching.starts_in(2), 1);
        assert!(m.operator_residual < 1e-8);
        for n in 0..=2 {
            let direct = Mat::identity(c.dim(n), c.dim(n)) - &r.phi[n] * &r.psi[n];
            let op = m.reconstruction_operator(n);
            assert!(linalg::rel_residual(&op, &direct) < 1e-9);
            assert!(linalg::rel_residual(&(&op * &op), &op) < 1e-9);
            let expected = if n == 0 { 0 } else { 1 };
            assert_eq!(linalg::rank(&op), expected);
        }
        assert_eq!(m.pair_counts(), pair_counts(&Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap(), &c.dims()));
    }

    #[test]
    fn counts_of_single_pair() {
        let c = triangle();
        let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
        let t = pair_counts(&m, &c.dims());
        assert_eq!(t.minus, vec![0, 0, 1]);
        assert_eq!(t.plus, vec![0, 1, 0]);
        assert_eq!(t.zero, vec![3, 2, 0]);
        assert!(is_free(&m, 1));
        let down = Matching::from_names(&c, &[("e0_1", "v0")]).unwrap();
        assert!(!is_free(&down, 1));
        assert_eq!(pair_counts(&Matching::empty(), &c.dims()).zero, c.dims());
    }

    #[test]
    fn broken_retract_is_rejected() {
        let (_, r) = single_pair();
        let mut d: DeformationRetract = (&r).into();
        d.psi[1][(0, 0)] += 1.0;
        assert!(matches!(split_retract(&d), Err(Error::InvalidRetract(_))));
    }
}
