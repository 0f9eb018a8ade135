#![allow(dead_code)]

use std::collections::HashMap;

use morsepack::complex::{BasedChainComplex, CellId, InnerProduct, Signal, SparseMatrix};
use morsepack::harness::{generate_grid_complex, GridSpec};
use morsepack::hodge::HodgeProjector;
use morsepack::linalg::{rank, Mat, Vector};
use morsepack::morse::{is_morse_matching, Retraction};
use morsepack::Matching;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn interval() -> BasedChainComplex {
    BasedChainComplex::from_simplices(&[&[0, 1]])
}

pub fn triangle() -> BasedChainComplex {
    BasedChainComplex::from_simplices(&[&[0, 1, 2]])
}

pub fn hollow_triangle() -> BasedChainComplex {
    BasedChainComplex::from_simplices(&[&[0, 1], &[1, 2], &[0, 2]])
}

pub fn hand_examples() -> Vec<(&'static str, BasedChainComplex)> {
    vec![
        ("interval", interval()),
        ("filled triangle", triangle()),
        ("hollow triangle", hollow_triangle()),
    ]
}

pub fn grid(rows: usize, cols: usize, seed: u64) -> BasedChainComplex {
    generate_grid_complex(&GridSpec::new(rows, cols, seed))
        .unwrap()
        .complex
}

/// A simplicial complex on at most `max_vertices` vertices generated by a
/// few random facets of dimension at most `max_dim`.
pub fn random_simplicial(r: &mut ChaCha8Rng, max_vertices: usize, max_dim: usize) -> BasedChainComplex {
    let nv = r.random_range(2..=max_vertices.max(2));
    let nf = r.random_range(1..=4);
    let mut facets: Vec<Vec<usize>> = Vec::new();
    for _ in 0..nf {
        let size = r.random_range(2..=(max_dim + 1).min(nv));
        let mut vs: Vec<usize> = (0..nv).collect();
        vs.shuffle(r);
        let mut f = vs[..size].to_vec();
        f.sort_unstable();
        facets.push(f);
    }
    let refs: Vec<&[usize]> = facets.iter().map(|f| f.as_slice()).collect();
    BasedChainComplex::from_simplices(&refs)
}

/// Scale every basis vector by a random factor of random sign, which turns
/// the unit incidences into arbitrary nonzero ones.
pub fn rescale(c: &BasedChainComplex, r: &mut ChaCha8Rng) -> BasedChainComplex {
    let top = c.max_degree();
    let factors: Vec<Vec<f64>> = (0..=top)
        .map(|n| {
            (0..c.dim(n))
                .map(|_| {
                    let x: f64 = r.random_range(0.5..2.0);
                    if r.random_bool(0.5) {
                        -x
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    let names: Vec<Vec<String>> = (0..=top).map(|n| c.cell_names(n).to_vec()).collect();
    let boundaries = (0..=top)
        .map(|n| {
            if n == 0 {
                return SparseMatrix::zeros(0, c.dim(0));
            }
            let t: Vec<(usize, usize, f64)> = c
                .boundary(n)
                .triplets()
                .map(|(i, j, v)| (i, j, v * factors[n][j] / factors[n - 1][i]))
                .collect();
            SparseMatrix::from_triplets(c.dim(n - 1), c.dim(n), &t)
        })
        .collect();
    BasedChainComplex::new(names, boundaries, None).unwrap()
}

pub fn diagonal_weights(c: &BasedChainComplex, r: &mut ChaCha8Rng) -> BasedChainComplex {
    let w = (0..=c.max_degree())
        .map(|n| InnerProduct::Diagonal((0..c.dim(n)).map(|_| r.random_range(0.5..3.0)).collect()))
        .collect();
    c.clone().with_inner_products(w).unwrap()
}

/// Random symmetric positive definite inner products `A Aᵀ / k + I / 2`.
pub fn dense_weights(c: &BasedChainComplex, r: &mut ChaCha8Rng) -> BasedChainComplex {
    let w = (0..=c.max_degree())
        .map(|n| {
            let k = c.dim(n);
            let a = Mat::from_fn(k, k, |_, _| r.random_range(-1.0..1.0));
            let mut m = &a * a.transpose() / k.max(1) as f64;
            for i in 0..k {
                m[(i, i)] += 0.5;
            }
            InnerProduct::Dense(m)
        })
        .collect();
    c.clone().with_inner_products(w).unwrap()
}

pub fn random_vector(r: &mut ChaCha8Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_signal(r: &mut ChaCha8Rng, c: &BasedChainComplex, n: usize) -> Signal {
    Signal::from_vector(n, random_vector(r, c.dim(n)))
}

/// All `(alpha, beta)` with `∂_{beta,alpha} != 0`.
pub fn incident_pairs(c: &BasedChainComplex) -> Vec<(CellId, CellId)> {
    let mut out = Vec::new();
    for d in 1..=c.max_degree() {
        for (i, j, v) in c.boundary(d).triplets() {
            if v != 0.0 {
                out.push((CellId::new(d, j), CellId::new(d - 1, i)));
            }
        }
    }
    out
}

/// Greedily add random incident pairs while the matching stays Morse. Pairs
/// whose top cell has degree `skip_degree` are never used.
pub fn random_matching(
    c: &BasedChainComplex,
    r: &mut ChaCha8Rng,
    max_pairs: usize,
    skip_degree: Option<usize>,
) -> Matching {
    let mut cand: Vec<(CellId, CellId)> = incident_pairs(c)
        .into_iter()
        .filter(|p| Some(p.0.degree) != skip_degree)
        .collect();
    cand.shuffle(r);
    let mut m = Matching::empty();
    let mut used = std::collections::HashSet::new();
    for (a, b) in cand {
        if m.len() >= max_pairs {
            break;
        }
        if used.contains(&a) || used.contains(&b) {
            continue;
        }
        let mut trial = m.clone();
        trial.push(a, b);
        if is_morse_matching(c, &trial).ok {
            m = trial;
            used.insert(a);
            used.insert(b);
        }
    }
    m
}

/// Edge list of the matching graph built directly from the dense
/// boundaries: `α -> β` with weight `∂_{β,α}`, reversed with weight
/// `-1/∂_{β,α}` for matched pairs.
pub fn oracle_graph(c: &BasedChainComplex, m: &Matching) -> HashMap<CellId, Vec<(CellId, f64)>> {
    let matched: std::collections::HashSet<(CellId, CellId)> = m.pairs().iter().copied().collect();
    let mut g: HashMap<CellId, Vec<(CellId, f64)>> = HashMap::new();
    for d in 1..=c.max_degree() {
        let b = c.boundary_dense(d);
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                let v = b[(i, j)];
                if v == 0.0 {
                    continue;
                }
                let (a, f) = (CellId::new(d, j), CellId::new(d - 1, i));
                if matched.contains(&(a, f)) {
                    g.entry(f).or_default().push((a, -1.0 / v));
                } else {
                    g.entry(a).or_default().push((f, v));
                }
            }
        }
    }
    g
}

/// Sum of path products over every directed path from `from` to `to`,
/// enumerated exhaustively. The empty path counts when `from == to`.
pub fn brute_force_index(
    g: &HashMap<CellId, Vec<(CellId, f64)>>,
    from: CellId,
    to: CellId,
) -> f64 {
    fn walk(
        g: &HashMap<CellId, Vec<(CellId, f64)>>,
        at: CellId,
        to: CellId,
        prod: f64,
        depth: usize,
    ) -> f64 {
        assert!(depth < 64, "path longer than any acyclic graph here");
        let mut total = if at == to { prod } else { 0.0 };
        if let Some(next) = g.get(&at) {
            for &(n, w) in next {
                total += walk(g, n, to, prod * w, depth + 1);
            }
        }
        total
    }
    walk(g, from, to, 1.0, 0)
}

/// Chain complex with `∂^D_k = ∂†_{top-k+1}`, i.e. degrees reversed and the
/// adjoint boundaries as boundaries. Cell names are kept.
pub fn dual_complex(c: &BasedChainComplex) -> BasedChainComplex {
    let top = c.max_degree();
    let names: Vec<Vec<String>> = (0..=top).map(|k| c.cell_names(top - k).to_vec()).collect();
    let boundaries = (0..=top)
        .map(|k| {
            if k == 0 {
                return SparseMatrix::zeros(0, c.dim(top));
            }
            let adj = c.adjoint_boundary(top - k + 1).unwrap();
            SparseMatrix::from_dense(&adj, 0.0)
        })
        .collect();
    let weights = (0..=top).map(|k| c.inner_product_of(top - k).clone()).collect();
    BasedChainComplex::new(names, boundaries, Some(weights)).unwrap()
}

/// Relative Frobenius distance `‖a - b‖ / max(1, ‖b‖)`.
pub fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// `rank ∂_n` for `n = 0..=top+1` from plain SVD ranks, zero at both ends.
pub fn boundary_ranks(c: &BasedChainComplex) -> Vec<usize> {
    let top = c.max_degree();
    (0..=top + 1)
        .map(|n| if n == 0 || n > top { 0 } else { rank(&c.boundary_dense(n)) })
        .collect()
}

/// `dim C_n - rank ∂_n - rank ∂_{n+1}`.
pub fn rank_bettis(c: &BasedChainComplex) -> Vec<usize> {
    let r = boundary_ranks(c);
    (0..=c.max_degree()).map(|n| c.dim(n) - r[n] - r[n + 1]).collect()
}

/// `Ψ_n† = W_n⁻¹ Ψ_nᵀ W^M_n` and `Φ_n† = (W^M_n)⁻¹ Φ_nᵀ W_n`.
pub fn adjoints(r: &Retraction, n: usize) -> (Mat, Mat) {
    let ws = r.source.inner_product_of(n);
    let wr = r.reduced.inner_product_of(n);
    (
        ws.solve(&(r.psi[n].transpose() * wr.matrix())),
        wr.solve(&(r.phi[n].transpose() * ws.matrix())),
    )
}

/// `‖Proj_{Ker ∂_{n+1}†}(ΦΨs - s)‖ / ‖s‖`.
pub fn cocycle_error(c: &BasedChainComplex, r: &Retraction, p: &HodgeProjector, s: &Vector) -> f64 {
    let n = p.degree();
    let err = &r.phi[n] * (&r.psi[n] * s) - s;
    let h = p.decompose(&Signal::from_vector(n, err)).unwrap();
    c.norm(n, &h.ker_coboundary()).unwrap() / c.vector_norm(n, s)
}

/// `‖Proj_{Ker ∂_m}(Ψ†Φ†s - s)‖ / ‖s‖` for `s` in degree `m`.
pub fn cycle_error(c: &BasedChainComplex, r: &Retraction, p: &HodgeProjector, s: &Vector) -> f64 {
    let m = p.degree();
    let (psi_t, phi_t) = adjoints(r, m);
    let err = &psi_t * (&phi_t * s) - s;
    let h = p.decompose(&Signal::from_vector(m, err)).unwrap();
    c.norm(m, &h.ker_boundary()).unwrap() / c.vector_norm(m, s)
}

/// A matching whose first pair is a random `(1,0)`-pair, extended by other
/// random pairs while it stays Morse.
pub fn matching_with_down_pair(c: &BasedChainComplex, r: &mut ChaCha8Rng) -> Matching {
    let downs: Vec<(CellId, CellId)> = incident_pairs(c)
        .into_iter()
        .filter(|p| p.0.degree == 1)
        .collect();
    let first = downs[r.random_range(0..downs.len())];
    let rest = random_matching(c, r, 6, None);
    let mut m = Matching::new(vec![first]);
    for &(a, b) in rest.pairs() {
        if [a, b].iter().any(|x| *x == first.0 || *x == first.1) {
            continue;
        }
        let mut trial = m.clone();
        trial.push(a, b);
        if is_morse_matching(c, &trial).ok {
            m = trial;
        }
    }
    m
}
