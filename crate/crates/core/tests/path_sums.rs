mod common;

use common::*;
use morsepack::complex::{BasedChainComplex, CellId};
use morsepack::morse::{adjoint_retraction, is_morse_matching, reduce, summed_index};
use morsepack::Matching;

/// Small complexes with at most 12 cells, some with non-unit incidences.
fn small_complexes() -> Vec<BasedChainComplex> {
    let mut r = rng(21);
    let mut out: Vec<BasedChainComplex> = hand_examples().into_iter().map(|(_, c)| c).collect();
    out.push(BasedChainComplex::from_simplices(&[&[0, 1, 2], &[1, 2, 3]]));
    out.push(BasedChainComplex::from_simplices(&[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]));
    while out.len() < 40 {
        let c = random_simplicial(&mut r, 5, 2);
        if c.num_cells() <= 12 {
            out.push(rescale(&c, &mut r));
        }
    }
    out
}

fn all_cells(c: &BasedChainComplex) -> Vec<CellId> {
    c.all_cells().collect()
}

#[test]
fn summed_index_equals_path_enumeration() {
    let mut r = rng(22);
    let mut checked = 0;
    for c in small_complexes() {
        assert!(c.num_cells() <= 12);
        for _ in 0..5 {
            let m = random_matching(&c, &mut r, 6, None);
            let g = oracle_graph(&c, &m);
            for &a in &all_cells(&c) {
                for &b in &all_cells(&c) {
                    let fast = summed_index(&c, &m, a, b).unwrap();
                    let slow = brute_force_index(&g, a, b);
                    assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()), "{a} -> {b}: {fast} vs {slow}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn retraction_maps_are_path_sums() {
    let mut r = rng(23);
    for c in small_complexes() {
        let m = random_matching(&c, &mut r, 6, None);
        let g = oracle_graph(&c, &m);
        let ret = reduce(&c, &m).unwrap();
        for n in 0..=c.max_degree() {
            for (k, &crit) in ret.critical[n].iter().enumerate() {
                let alpha = CellId::new(n, crit);
                for beta in c.cells(n) {
                    let psi = brute_force_index(&g, beta, alpha);
                    let phi = brute_force_index(&g, alpha, beta);
                    assert!((ret.psi[n][(k, beta.index)] - psi).abs() <= 1e-12 * (1.0 + psi.abs()));
                    assert!((ret.phi[n][(beta.index, k)] - phi).abs() <= 1e-12 * (1.0 + phi.abs()));
                }
            }
            if n < c.max_degree() {
                for beta in c.cells(n) {
                    for sigma in c.cells(n + 1) {
                        let h = brute_force_index(&g, beta, sigma);
                        assert!((ret.h[n][(sigma.index, beta.index)] - h).abs() <= 1e-12 * (1.0 + h.abs()));
                    }
                }
            }
        }
    }
}

#[test]
fn triangle_index_by_hand() {
    let c = triangle();
    let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
    let (e01, e02) = (c.cell("e0_1").unwrap(), c.cell("e0_2").unwrap());
    assert_eq!(summed_index(&c, &m, e01, e02).unwrap(), 1.0);
    assert_eq!(summed_index(&c, &m, e01, e01).unwrap(), 1.0);
    let (v0, v1) = (c.cell("v0").unwrap(), c.cell("v1").unwrap());
    assert_eq!(summed_index(&c, &m, v0, v1).unwrap(), 0.0);
}

#[test]
fn alternating_cycle_is_rejected() {
    let c = BasedChainComplex::from_simplices(&[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]);
    let m = Matching::from_names(
        &c,
        &[("e0_1", "v1"), ("e1_2", "v2"), ("e2_3", "v3"), ("e0_3", "v0")],
    )
    .unwrap();
    let report = is_morse_matching(&c, &m);
    assert!(report.has("acyclicity"), "{report}");
}

/// The adjoint maps on a diagonal inner product are the retraction maps of
/// the dual complex (degrees reversed, `∂†` as boundary) for the reversed
/// matching, so they are path sums in its graph.
#[test]
fn adjoint_maps_are_dual_path_sums() {
    let mut r = rng(24);
    for c in small_complexes() {
        let c = diagonal_weights(&c, &mut r);
        let top = c.max_degree();
        let m = random_matching(&c, &mut r, 6, None);
        let adj = adjoint_retraction(&c, &m).unwrap();
        assert!(adj.residuals().max() <= 1e-9);
        let d = dual_complex(&c);
        let flip = |x: CellId| CellId::new(top - x.degree, x.index);
        let dm = Matching::new(m.pairs().iter().map(|&(a, b)| (flip(b), flip(a))).collect());
        assert!(is_morse_matching(&d, &dm).ok);
        let g = oracle_graph(&d, &dm);
        let crit = &adj.retraction.critical;
        for n in 0..=top {
            for (k, &ci) in crit[n].iter().enumerate() {
                let alpha = flip(CellId::new(n, ci));
                for beta in c.cells(n) {
                    let b = flip(beta);
                    // Ψ† plays the inclusion and Φ† the projection
                    let incl = brute_force_index(&g, alpha, b);
                    let proj = brute_force_index(&g, b, alpha);
                    assert!((adj.psi_t[n][(beta.index, k)] - incl).abs() <= 1e-10 * (1.0 + incl.abs()));
                    assert!((adj.phi_t[n][(k, beta.index)] - proj).abs() <= 1e-10 * (1.0 + proj.abs()));
                }
            }
            if n >= 1 {
                for beta in c.cells(n) {
                    for sigma in c.cells(n - 1) {
                        let h = brute_force_index(&g, flip(beta), flip(sigma));
                        let got = adj.h_t[n - 1][(sigma.index, beta.index)];
                        assert!((got - h).abs() <= 1e-10 * (1.0 + h.abs()));
                    }
                }
            }
        }
    }
}

#[test]
fn adjoint_requires_orthogonal_base() {
    let mut r = rng(25);
    let c = dense_weights(&triangle(), &mut r);
    let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
    assert!(matches!(
        adjoint_retraction(&c, &m),
        Err(morsepack::Error::NonOrthogonalBase)
    ));
}
