use serde::Serialize;

use super::{ensure_morse, Flow, Matching, SequentialMatching};
use crate::complex::{BasedChainComplex, CellId, Signal, SparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// The Morse complex of a matching together with the deformation retract
/// `Ψ: C -> C^M`, `Φ: C^M -> C` and homotopy `h: C_n -> C_{n+1}`.
///
/// With the orientation produced here the maps satisfy `ΨΦ = 1`,
/// `Ψ∂ = ∂^M Ψ`, `∂Φ = Φ∂^M` and `∂h + h∂ = ΦΨ - 1`.
#[derive(Debug, Clone)]
pub struct Retraction {
    pub source: BasedChainComplex,
    pub reduced: BasedChainComplex,
    /// Source index of each reduced cell, per degree.
    pub critical: Vec<Vec<usize>>,
    /// `psi[n]`: `dim C^M_n x dim C_n`.
    pub psi: Vec<Mat>,
    /// `phi[n]`: `dim C_n x dim C^M_n`.
    pub phi: Vec<Mat>,
    /// `h[n]`: `dim C_{n+1} x dim C_n` (empty rows in the top degree).
    pub h: Vec<Mat>,
}

/// Largest relative residual of each identity, over all degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetractionResiduals {
    pub psi_chain: f64,
    pub phi_chain: f64,
    pub psi_phi: f64,
    pub homotopy: f64,
}

impl RetractionResiduals {
    pub fn max(&self) -> f64 {
        self.psi_chain
            .max(self.phi_chain)
            .max(self.psi_phi)
            .max(self.homotopy)
    }
}

fn d(c: &BasedChainComplex, n: usize) -> Mat {
    c.boundary_dense(n)
}

impl Retraction {
    pub fn max_degree(&self) -> usize {
        self.source.max_degree()
    }

    pub fn residuals(&self) -> RetractionResiduals {
        let top = self.max_degree();
        let (s, r) = (&self.source, &self.reduced);
        let mut out = RetractionResiduals {
            psi_chain: 0.0,
            phi_chain: 0.0,
            psi_phi: 0.0,
            homotopy: 0.0,
        };
        for n in 0..=top {
            if n >= 1 {
                out.psi_chain = out.psi_chain.max(linalg::rel_residual(
                    &(&self.psi[n - 1] * d(s, n)),
                    &(d(r, n) * &self.psi[n]),
                ));
                out.phi_chain = out.phi_chain.max(linalg::rel_residual(
                    &(d(s, n) * &self.phi[n]),
                    &(&self.phi[n - 1] * d(r, n)),
                ));
            }
            let dim_r = r.dim(n);
            out.psi_phi = out.psi_phi.max(linalg::rel_residual(
                &(&self.psi[n] * &self.phi[n]),
                &Mat::identity(dim_r, dim_r),
            ));
            let dim = s.dim(n);
            let mut lhs = Mat::zeros(dim, dim);
            if n < top {
                lhs += d(s, n + 1) * &self.h[n];
            }
            if n >= 1 {
                lhs += &self.h[n - 1] * d(s, n);
            }
            let rhs = &self.phi[n] * &self.psi[n] - Mat::identity(dim, dim);
            out.homotopy = out.homotopy.max(linalg::rel_residual(&lhs, &rhs));
        }
        out
    }

    /// Fail unless every identity holds to `tol`.
    pub fn check(&self, tol: f64) -> Result<RetractionResiduals> {
        let res = self.residuals();
        if res.max() > tol {
            return Err(Error::InvalidRetract(format!(
                "residuals {res:?} exceed {tol:e}"
            )));
        }
        Ok(res)
    }

    /// `Ψ s` as a signal on the reduced complex.
    pub fn compress(&self, s: &Signal) -> Result<Signal> {
        self.source.check_signal(s)?;
        Ok(Signal::from_vector(s.degree, &self.psi[s.degree] * &s.values))
    }

    /// `Φ t` as a signal on the source complex.
    pub fn expand(&self, t: &Signal) -> Result<Signal> {
        self.reduced.check_signal(t)?;
        Ok(Signal::from_vector(t.degree, &self.phi[t.degree] * &t.values))
    }

    /// `ΦΨ s`.
    pub fn reconstruct(&self, s: &Signal) -> Result<Signal> {
        self.expand(&self.compress(s)?)
    }

    pub fn to_file(&self) -> RetractionFile {
        let top = self.max_degree();
        let rows = |m: &Mat| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        RetractionFile {
            source_cells: (0..=top)
                .map(|n| self.source.cell_names(n).to_vec())
                .collect(),
            reduced_cells: (0..=top)
                .map(|n| self.reduced.cell_names(n).to_vec())
                .collect(),
            psi: self.psi.iter().map(rows).collect(),
            phi: self.phi.iter().map(rows).collect(),
            h: self.h.iter().map(rows).collect(),
        }
    }
}

/// Dense export of a retraction: matrices are row-major, rows and columns
/// follow the listed cell orders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetractionFile {
    pub source_cells: Vec<Vec<String>>,
    pub reduced_cells: Vec<Vec<String>>,
    pub psi: Vec<Vec<Vec<f64>>>,
    pub phi: Vec<Vec<Vec<f64>>>,
    pub h: Vec<Vec<Vec<f64>>>,
}

fn positions(crit: &[usize], dim: usize) -> Vec<Option<usize>> {
    let mut pos = vec![None; dim];
    for (k, &i) in crit.iter().enumerate() {
        pos[i] = Some(k);
    }
    pos
}

fn identity_retraction(c: &BasedChainComplex) -> Retraction {
    let top = c.max_degree();
    Retraction {
        source: c.clone(),
        reduced: c.clone(),
        critical: (0..=top).map(|n| (0..c.dim(n)).collect()).collect(),
        psi: (0..=top).map(|n| Mat::identity(c.dim(n), c.dim(n))).collect(),
        phi: (0..=top).map(|n| Mat::identity(c.dim(n), c.dim(n))).collect(),
        h: (0..=top)
            .map(|n| Mat::zeros(if n < top { c.dim(n + 1) } else { 0 }, c.dim(n)))
            .collect(),
    }
}

/// The Morse complex and retraction of a Morse matching.
///
/// `∂^M` and `Φ` on a critical `n`-cell sum over paths through degrees
/// `n - 1` and `n`; `Ψ` and `h` on any `n`-cell sum over paths through
/// degrees `n` and `n + 1`. The reduced inner products are the restrictions
/// of the source ones to the critical cells.
pub fn reduce(complex: &BasedChainComplex, m: &Matching) -> Result<Retraction> {
    ensure_morse(complex, m)?;
    if m.is_empty() {
        return Ok(identity_retraction(complex));
    }
    let top = complex.max_degree();
    let flow = Flow::new(complex, m);
    let critical = m.critical(complex);
    let pos: Vec<Vec<Option<usize>>> = (0..=top)
        .map(|n| positions(&critical[n], complex.dim(n)))
        .collect();
    let mut psi = Vec::with_capacity(top + 1);
    let mut phi = Vec::with_capacity(top + 1);
    let mut h = Vec::with_capacity(top + 1);
    let mut boundary = vec![SparseMatrix::zeros(0, critical[0].len())];
    for n in 0..=top {
        let dim = complex.dim(n);
        let up = if n < top { complex.dim(n + 1) } else { 0 };
        let mut psi_n = Mat::zeros(critical[n].len(), dim);
        let mut h_n = Mat::zeros(up, dim);
        for a in 0..dim {
            for (t, g) in flow.from(CellId::new(n, a), n, (n + 1).min(top)) {
                if t.degree == n {
                    if let Some(k) = pos[n][t.index] {
                        psi_n[(k, a)] = g;
                    }
                } else {
                    h_n[(t.index, a)] = g;
                }
            }
        }
        let mut phi_n = Mat::zeros(dim, critical[n].len());
        let mut triples = Vec::new();
        for (k, &a) in critical[n].iter().enumerate() {
            for (t, g) in flow.from(CellId::new(n, a), n.saturating_sub(1), n) {
                if t.degree == n {
                    phi_n[(t.index, k)] = g;
                } else if let Some(r) = pos[n - 1][t.index] {
                    if g != 0.0 {
                        triples.push((r, k, g));
                    }
                }
            }
        }
        if n >= 1 {
            boundary.push(SparseMatrix::from_triplets(
                critical[n - 1].len(),
                critical[n].len(),
                &triples,
            ));
        }
        psi.push(psi_n);
        phi.push(phi_n);
        h.push(h_n);
    }
    let reduced = complex.with_cells(&critical, boundary);
    Ok(Retraction {
        source: complex.clone(),
        reduced,
        critical,
        psi,
        phi,
        h,
    })
}

fn check_pair(complex: &BasedChainComplex, alpha: CellId, beta: CellId) -> Result<f64> {
    for c in [alpha, beta] {
        if c.degree > complex.max_degree() || c.index >= complex.dim(c.degree) {
            return Err(Error::UnknownCell(c.to_string()));
        }
    }
    if alpha.degree != beta.degree + 1 {
        return Err(Error::DegreeMismatch {
            expected: alpha.degree.saturating_sub(1),
            actual: beta.degree,
        });
    }
    let pivot = complex.incidence(alpha, beta);
    if pivot == 0.0 {
        return Err(Error::ZeroIncidence {
            alpha: complex.name(alpha).to_string(),
            beta: complex.name(beta).to_string(),
        });
    }
    Ok(pivot)
}

/// Row `beta` of `∂`, as `(column, value)` entries.
fn boundary_row(b: &SparseMatrix, beta: usize) -> Vec<(usize, f64)> {
    (0..b.ncols())
        .filter_map(|c| {
            let v = b.get(beta, c);
            (v != 0.0).then_some((c, v))
        })
        .collect()
}

/// The Morse complex of the single pair `(alpha, beta)`, by the closed form
/// `∂^M_{τ,σ} = ∂_{τ,σ} - ∂_{τ,α} ∂_{β,σ} / ∂_{β,α}`.
pub fn single_pair_complex(
    complex: &BasedChainComplex,
    alpha: CellId,
    beta: CellId,
) -> Result<BasedChainComplex> {
    let pivot = check_pair(complex, alpha, beta)?;
    let top = complex.max_degree();
    let d = beta.degree;
    let keep: Vec<Vec<usize>> = (0..=top)
        .map(|n| {
            (0..complex.dim(n))
                .filter(|&i| !(n == d && i == beta.index || n == d + 1 && i == alpha.index))
                .collect()
        })
        .collect();
    let mut boundary = vec![SparseMatrix::zeros(0, keep[0].len())];
    for n in 1..=top {
        let b = complex.boundary(n);
        if n == d + 1 {
            let mut updated = b.clone();
            let col_alpha = b.col(alpha.index).to_vec();
            for (sigma, v) in boundary_row(b, beta.index) {
                if sigma == alpha.index {
                    continue;
                }
                let c = -v / pivot;
                for &(r, a) in &col_alpha {
                    updated.add_to(r, sigma, c * a);
                }
            }
            boundary.push(updated.submatrix(&keep[n - 1], &keep[n]));
        } else {
            boundary.push(b.submatrix(&keep[n - 1], &keep[n]));
        }
    }
    Ok(complex.with_cells(&keep, boundary))
}

/// Closed-form reduction of a single pair.
pub fn single_pairing_reduce(
    complex: &BasedChainComplex,
    alpha: CellId,
    beta: CellId,
) -> Result<Retraction> {
    let pivot = check_pair(complex, alpha, beta)?;
    let reduced = single_pair_complex(complex, alpha, beta)?;
    let d = beta.degree;
    let mut out = identity_retraction(complex);
    out.reduced = reduced;
    out.critical[d].retain(|&i| i != beta.index);
    out.critical[d + 1].retain(|&i| i != alpha.index);
    let b = complex.boundary(d + 1);
    // Ψ_d(β) = -Σ_{τ≠β} ∂_{τ,α}/∂_{β,α} τ, Ψ_{d+1}(α) = 0
    let mut psi_d = Mat::identity(complex.dim(d), complex.dim(d));
    for &(t, v) in b.col(alpha.index) {
        if t != beta.index {
            psi_d[(t, beta.index)] = -v / pivot;
        }
    }
    out.psi[d] = linalg::select_rows(&psi_d, &out.critical[d]);
    out.psi[d + 1] = linalg::select_rows(&out.psi[d + 1], &out.critical[d + 1]);
    // Φ_{d+1}(η) = η - ∂_{β,η}/∂_{β,α} α
    let mut phi_up = Mat::identity(complex.dim(d + 1), complex.dim(d + 1));
    for (eta, v) in boundary_row(b, beta.index) {
        if eta != alpha.index {
            phi_up[(alpha.index, eta)] = -v / pivot;
        }
    }
    out.phi[d + 1] = linalg::select_cols(&phi_up, &out.critical[d + 1]);
    out.phi[d] = linalg::select_cols(&out.phi[d], &out.critical[d]);
    // h_d(β) = -α/∂_{β,α}
    out.h[d][(alpha.index, beta.index)] = -1.0 / pivot;
    Ok(out)
}

/// Compose the stages of a sequential matching into one retraction:
/// `Ψ = Ψ_k … Ψ_1`, `Φ = Φ_1 … Φ_k` and `h = h_1 + Φ_1 h' Ψ_1` accumulated
/// stage by stage. Single-pair stages use the closed form.
pub fn sequential_reduce(complex: &BasedChainComplex, s: &SequentialMatching) -> Result<Retraction> {
    let mut acc = identity_retraction(complex);
    let top = complex.max_degree();
    for (j, stage) in s.stages().iter().enumerate() {
        let cur = acc.reduced.clone();
        let pos: Vec<Vec<Option<usize>>> = (0..=top)
            .map(|n| positions(&acc.critical[n], complex.dim(n)))
            .collect();
        let local = stage
            .pairs()
            .iter()
            .map(|&(a, b)| {
                let map = |c: CellId| -> Result<CellId> {
                    pos.get(c.degree)
                        .and_then(|p| p.get(c.index).copied().flatten())
                        .map(|i| CellId::new(c.degree, i))
                        .ok_or_else(|| Error::StageMismatch {
                            stage: j,
                            message: format!("cell {c} is not critical before this stage"),
                        })
                };
                Ok((map(a)?, map(b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let local = Matching::new(local);
        super::ensure_morse(&cur, &local).map_err(|e| Error::StageMismatch {
            stage: j,
            message: e.to_string(),
        })?;
        if local.len() == 1 {
            let (alpha, beta) = local.pairs()[0];
            let pivot = cur.incidence(alpha, beta);
            let d = beta.degree;
            let b = cur.boundary(d + 1);
            let next = single_pair_complex(&cur, alpha, beta)?;
            // homotopy first, from the previous Φ and Ψ
            let phi_col = acc.phi[d + 1].column(alpha.index).into_owned();
            let psi_row = acc.psi[d].row(beta.index).into_owned();
            acc.h[d] += (phi_col * psi_row) * (-1.0 / pivot);
            for &(t, v) in b.col(alpha.index) {
                if t != beta.index {
                    let row = acc.psi[d].row(beta.index) * (-v / pivot);
                    let mut target = acc.psi[d].row_mut(t);
                    target += row;
                }
            }
            for (eta, v) in boundary_row(b, beta.index) {
                if eta != alpha.index {
                    let col = acc.phi[d + 1].column(alpha.index) * (-v / pivot);
                    let mut target = acc.phi[d + 1].column_mut(eta);
                    target += col;
                }
            }
            let keep_d: Vec<usize> = (0..cur.dim(d)).filter(|&i| i != beta.index).collect();
            let keep_u: Vec<usize> = (0..cur.dim(d + 1)).filter(|&i| i != alpha.index).collect();
            acc.psi[d] = linalg::select_rows(&acc.psi[d], &keep_d);
            acc.psi[d + 1] = linalg::select_rows(&acc.psi[d + 1], &keep_u);
            acc.phi[d] = linalg::select_cols(&acc.phi[d], &keep_d);
            acc.phi[d + 1] = linalg::select_cols(&acc.phi[d + 1], &keep_u);
            acc.critical[d].remove(beta.index);
            acc.critical[d + 1].remove(alpha.index);
            acc.reduced = next;
        } else {
            let r = reduce(&cur, &local)?;
            for n in 0..top {
                let add = &acc.phi[n + 1] * &r.h[n] * &acc.psi[n];
                acc.h[n] += add;
            }
            for n in 0..=top {
                acc.psi[n] = &r.psi[n] * &acc.psi[n];
                acc.phi[n] = &acc.phi[n] * &r.phi[n];
                acc.critical[n] = r.critical[n].iter().map(|&i| acc.critical[n][i]).collect();
            }
            acc.reduced = r.reduced;
        }
    }
    Ok(acc)
}

/// `W`-adjoints of the retraction maps of a matching on a complex with an
/// orthogonal base. `psi_t[n]: C^M_n -> C_n`, `phi_t[n]: C_n -> C^M_n`,
/// `h_t[n]: C_{n+1} -> C_n`.
#[derive(Debug, Clone)]
pub struct AdjointRetraction {
    pub retraction: Retraction,
    pub psi_t: Vec<Mat>,
    pub phi_t: Vec<Mat>,
    pub h_t: Vec<Mat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjointResiduals {
    pub psi_chain: f64,
    pub phi_chain: f64,
    pub phi_psi: f64,
    pub homotopy: f64,
}

impl AdjointResiduals {
    pub fn max(&self) -> f64 {
        self.psi_chain
            .max(self.phi_chain)
            .max(self.phi_psi)
            .max(self.homotopy)
    }
}

impl AdjointRetraction {
    /// Residuals of `∂†Ψ† = Ψ†∂^M†`, `Φ†∂† = ∂^M†Φ†`, `Φ†Ψ† = 1` and
    /// `h†∂† + ∂†h† = Ψ†Φ† - 1`.
    pub fn residuals(&self) -> AdjointResiduals {
        let s = &self.retraction.source;
        let r = &self.retraction.reduced;
        let top = s.max_degree();
        let mut out = AdjointResiduals {
            psi_chain: 0.0,
            phi_chain: 0.0,
            phi_psi: 0.0,
            homotopy: 0.0,
        };
        let adj = |c: &BasedChainComplex, n: usize| c.adjoint_of(n, n - 1, &c.boundary_dense(n));
        for n in 0..=top {
            if n >= 1 {
                let (ds, dr) = (adj(s, n), adj(r, n));
                out.psi_chain = out.psi_chain.max(linalg::rel_residual(
                    &(&ds * &self.psi_t[n - 1]),
                    &(&self.psi_t[n] * &dr),
                ));
                out.phi_chain = out.phi_chain.max(linalg::rel_residual(
                    &(&self.phi_t[n] * &ds),
                    &(&dr * &self.phi_t[n - 1]),
                ));
            }
            let k = r.dim(n);
            out.phi_psi = out
                .phi_psi
                .max(linalg::rel_residual(&(&self.phi_t[n] * &self.psi_t[n]), &Mat::identity(k, k)));
            let dim = s.dim(n);
            let mut lhs = Mat::zeros(dim, dim);
            if n < top {
                lhs += &self.h_t[n] * adj(s, n + 1);
            }
            if n >= 1 {
                lhs += adj(s, n) * &self.h_t[n - 1];
            }
            let rhs = &self.psi_t[n] * &self.phi_t[n] - Mat::identity(dim, dim);
            out.homotopy = out.homotopy.max(linalg::rel_residual(&lhs, &rhs));
        }
        out
    }
}

/// Adjoint retraction of `reduce(complex, m)`. Only defined for orthogonal
/// bases, where the adjoint of each component map is the component map of
/// the adjoint.
pub fn adjoint_retraction(complex: &BasedChainComplex, m: &Matching) -> Result<AdjointRetraction> {
    if !complex.is_orthogonal_base() {
        return Err(Error::NonOrthogonalBase);
    }
    let r = reduce(complex, m)?;
    let top = complex.max_degree();
    let mut psi_t = Vec::with_capacity(top + 1);
    let mut phi_t = Vec::with_capacity(top + 1);
    let mut h_t = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let ws = r.source.inner_product_of(n);
        let wr = r.reduced.inner_product_of(n);
        psi_t.push(ws.solve(&(r.psi[n].transpose() * wr.matrix())));
        phi_t.push(wr.solve(&(r.phi[n].transpose() * ws.matrix())));
        let up = if n < top {
            ws.solve(&(r.h[n].transpose() * r.source.inner_product_of(n + 1).matrix()))
        } else {
            Mat::zeros(complex.dim(n), 0)
        };
        h_t.push(up);
    }
    Ok(AdjointRetraction {
        retraction: r,
        psi_t,
        phi_t,
        h_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{ComplexBuilder, InnerProduct};

    fn triangle() -> BasedChainComplex {
        BasedChainComplex::from_simplices(&[&[0, 1, 2]])
    }

    fn cell(c: &BasedChainComplex, name: &str) -> CellId {
        c.cell(name).unwrap()
    }

    #[test]
    fn empty_matching_is_identity() {
        let c = triangle();
        let r = reduce(&c, &Matching::empty()).unwrap();
        assert_eq!(r.reduced.dims(), c.dims());
        assert_eq!(r.psi[1], Mat::identity(3, 3));
        assert_eq!(linalg::max_abs(&r.h[0]), 0.0);
    }

    #[test]
    fn triangle_single_pair() {
        let c = triangle();
        let (f, e01) = (cell(&c, "t0_1_2"), cell(&c, "e0_1"));
        let r = reduce(&c, &Matching::new(vec![(f, e01)])).unwrap();
        assert_eq!(r.reduced.cell_names(1), ["e0_2", "e1_2"]);
        assert_eq!(r.reduced.dims(), vec![3, 2, 0]);
        // Ψ₁(e01) = e02 - e12
        assert_eq!(r.psi[1].column(e01.index).as_slice(), &[1.0, -1.0]);
        assert_eq!(r.psi[2].nrows(), 0);
        assert_eq!(r.phi[1], linalg::select_cols(&Mat::identity(3, 3), &[1, 2]));
        assert_eq!(r.h[1][(0, e01.index)], -1.0);
        assert!(r.residuals().max() < 1e-12);
    }

    #[test]
    fn closed_form_matches_general() {
        let c = triangle();
        for (a, b) in [("t0_1_2", "e0_1"), ("t0_1_2", "e0_2"), ("e0_1", "v0"), ("e1_2", "v2")] {
            let (alpha, beta) = (cell(&c, a), cell(&c, b));
            let g = reduce(&c, &Matching::new(vec![(alpha, beta)])).unwrap();
            let s = single_pairing_reduce(&c, alpha, beta).unwrap();
            for n in 0..=2 {
                assert!(linalg::max_abs(&(&g.psi[n] - &s.psi[n])) < 1e-12);
                assert!(linalg::max_abs(&(&g.phi[n] - &s.phi[n])) < 1e-12);
                assert!(linalg::max_abs(&(&g.h[n] - &s.h[n])) < 1e-12);
                assert!(
                    linalg::max_abs(&(g.reduced.boundary_dense(n) - s.reduced.boundary_dense(n)))
                        < 1e-12
                );
            }
        }
    }

    #[test]
    fn pivot_minus_two() {
        let mut b = ComplexBuilder::new();
        let v = b.cell(0, "v");
        let x = b.cell(1, "x");
        let y = b.cell(1, "y");
        let f = b.cell(2, "f");
        b.incidence(f, x, -2.0).incidence(f, y, 1.0);
        let w = b.cell(2, "g");
        b.incidence(w, x, 1.0);
        let _ = v;
        let c = b.build().unwrap();
        let r = single_pairing_reduce(&c, f, x).unwrap();
        // ∂_{y,g} - ∂_{y,f} ∂_{x,g} / ∂_{x,f} = 0 - 1 * 1 / -2
        assert_eq!(r.reduced.boundary_dense(2)[(0, 0)], 0.5);
        assert!(r.residuals().max() < 1e-12);
    }

    #[test]
    fn zero_incidence_is_an_error() {
        let c = triangle();
        let e = single_pairing_reduce(&c, cell(&c, "e0_1"), cell(&c, "v2"));
        assert!(matches!(e, Err(Error::ZeroIncidence { .. })));
    }

    #[test]
    fn sequential_two_stages() {
        let c = triangle();
        let s = SequentialMatching::new(vec![
            Matching::new(vec![(cell(&c, "t0_1_2"), cell(&c, "e0_1"))]),
            Matching::new(vec![(cell(&c, "e0_2"), cell(&c, "v0")), (cell(&c, "e1_2"), cell(&c, "v1"))]),
        ]);
        let r = sequential_reduce(&c, &s).unwrap();
        assert_eq!(r.reduced.dims(), vec![1, 0, 0]);
        assert!(r.residuals().max() < 1e-12);
        let k = r.reduced.dim(0);
        assert_eq!(&r.psi[0] * &r.phi[0], Mat::identity(k, k));
    }

    #[test]
    fn stage_referring_to_removed_cell() {
        let c = triangle();
        let s = SequentialMatching::new(vec![
            Matching::new(vec![(cell(&c, "t0_1_2"), cell(&c, "e0_1"))]),
            Matching::new(vec![(cell(&c, "e0_1"), cell(&c, "v0"))]),
        ]);
        assert!(matches!(
            sequential_reduce(&c, &s),
            Err(Error::StageMismatch { stage: 1, .. })
        ));
    }

    #[test]
    fn adjoint_identity_weights_is_transpose() {
        let c = triangle();
        let m = Matching::new(vec![(cell(&c, "t0_1_2"), cell(&c, "e0_1"))]);
        let a = adjoint_retraction(&c, &m).unwrap();
        assert_eq!(a.psi_t[1], a.retraction.psi[1].transpose());
        // h₁†(f) = -e01
        assert_eq!(a.h_t[1][(cell(&c, "e0_1").index, 0)], -1.0);
        assert!(a.residuals().max() < 1e-12);
    }

    #[test]
    fn adjoint_requires_orthogonal_base() {
        let c = triangle()
            .with_inner_products(vec![
                InnerProduct::identity(3),
                InnerProduct::Dense(Mat::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 2.0, 0.0, 0.0, 0.0, 1.0])),
                InnerProduct::identity(1),
            ])
            .unwrap();
        assert!(matches!(
            adjoint_retraction(&c, &Matching::empty()),
            Err(Error::NonOrthogonalBase)
        ));
    }
}
