//! Algebraic Morse matchings, gradient flow and the induced Morse complex.
//!
//! A matching pairs a cell `α` of degree `d + 1` with a face `β` of degree
//! `d` whose incidence `∂_{β,α}` is invertible. Reversing the matched edges of
//! the cell graph gives `𝒢(C)^M`; the matching is Morse when that graph is
//! acyclic. Along a path every ordinary edge `a -> b` contributes `∂_{b,a}`
//! and every reversed edge `β -> α` contributes `-1 / ∂_{β,α}`; the summed
//! index `Γ_{β,α}` adds these products over all paths.

mod reduce;

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex::io::{read_json, write_json};
use crate::complex::sparse::CANCEL_TOL;
use crate::complex::{BasedChainComplex, CellId, ValidationReport, Violation};
use crate::error::{Error, Result};

pub use reduce::{
    adjoint_retraction, reduce, sequential_reduce, single_pair_complex, single_pairing_reduce,
    AdjointRetraction, AdjointResiduals, Retraction, RetractionFile, RetractionResiduals,
};

/// A set of pairs `(α, β)` with `deg α = deg β + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pairs: Vec<(CellId, CellId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingFile {
    pub pairs: Vec<(String, String)>,
}

impl Matching {
    pub fn new(pairs: Vec<(CellId, CellId)>) -> Self {
        Matching { pairs }
    }

    pub fn empty() -> Self {
        Matching::default()
    }

    /// Build from `(alpha_name, beta_name)` pairs.
    pub fn from_names<A: AsRef<str>, B: AsRef<str>>(
        complex: &BasedChainComplex,
        pairs: &[(A, B)],
    ) -> Result<Self> {
        let pairs = pairs
            .iter()
            .map(|(a, b)| Ok((complex.cell(a.as_ref())?, complex.cell(b.as_ref())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matching { pairs })
    }

    pub fn pairs(&self) -> &[(CellId, CellId)] {
        &self.pairs
    }

    pub fn push(&mut self, alpha: CellId, beta: CellId) {
        self.pairs.push((alpha, beta));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Unmatched cell indices per degree, ascending.
    pub fn critical(&self, complex: &BasedChainComplex) -> Vec<Vec<usize>> {
        let matched: HashSet<CellId> = self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        (0..=complex.max_degree())
            .map(|n| {
                (0..complex.dim(n))
                    .filter(|&i| !matched.contains(&CellId::new(n, i)))
                    .collect()
            })
            .collect()
    }

    /// Number of pairs whose top cell `α` has degree `n` (the set `M⁻_n`).
    pub fn starts_in(&self, n: usize) -> usize {
        self.pairs.iter().filter(|(a, _)| a.degree == n).count()
    }

    /// Number of pairs whose bottom cell `β` has degree `n` (the set `M⁺_n`).
    pub fn ends_in(&self, n: usize) -> usize {
        self.pairs.iter().filter(|(_, b)| b.degree == n).count()
    }

    pub fn to_file(&self, complex: &BasedChainComplex) -> MatchingFile {
        MatchingFile {
            pairs: self
                .pairs
                .iter()
                .map(|&(a, b)| (complex.name(a).to_string(), complex.name(b).to_string()))
                .collect(),
        }
    }

    pub fn from_file(complex: &BasedChainComplex, file: &MatchingFile) -> Result<Self> {
        Matching::from_names(complex, &file.pairs)
    }

    pub fn load(complex: &BasedChainComplex, path: impl AsRef<Path>) -> Result<Self> {
        Matching::from_file(complex, &read_json(path.as_ref())?)
    }

    pub fn save(&self, complex: &BasedChainComplex, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), &self.to_file(complex))
    }
}

/// An ordered list of matchings, each on the critical cells left by the
/// previous ones. Cells are indexed in the source complex; since reduction
/// keeps the original cells as critical cells, every stage refers to cells of
/// the source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequentialMatching {
    stages: Vec<Matching>,
}

impl SequentialMatching {
    pub fn new(stages: Vec<Matching>) -> Self {
        SequentialMatching { stages }
    }

    pub fn push(&mut self, stage: Matching) {
        self.stages.push(stage);
    }

    pub fn stages(&self) -> &[Matching] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.stages.iter().map(Matching::len).sum()
    }

    /// All pairs of all stages, in order.
    pub fn pairs(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.stages.iter().flat_map(|s| s.pairs().iter().copied())
    }

    pub fn starts_in(&self, n: usize) -> usize {
        self.stages.iter().map(|s| s.starts_in(n)).sum()
    }

    pub fn ends_in(&self, n: usize) -> usize {
        self.stages.iter().map(|s| s.ends_in(n)).sum()
    }

    pub fn to_files(&self, complex: &BasedChainComplex) -> Vec<MatchingFile> {
        self.stages.iter().map(|s| s.to_file(complex)).collect()
    }
}

/// A directed graph whose vertices are the cells of a complex.
#[derive(Debug, Clone)]
pub struct CellGraph {
    offsets: Vec<usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl CellGraph {
    fn index(&self, c: CellId) -> usize {
        self.offsets[c.degree] + c.index
    }

    fn cell(&self, v: usize) -> CellId {
        let degree = self.offsets.partition_point(|&o| o <= v) - 1;
        CellId::new(degree, v - self.offsets[degree])
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Outgoing edges with their index factors.
    pub fn successors(&self, c: CellId) -> impl Iterator<Item = (CellId, f64)> + '_ {
        self.adjacency[self.index(c)]
            .iter()
            .map(move |&(v, w)| (self.cell(v), w))
    }

    pub fn edges(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        (0..self.adjacency.len()).flat_map(move |u| {
            self.adjacency[u]
                .iter()
                .map(move |&(v, _)| (self.cell(u), self.cell(v)))
        })
    }

    /// A directed cycle, if any, as a closed vertex sequence.
    pub fn find_cycle(&self) -> Option<Vec<CellId>> {
        let n = self.adjacency.len();
        let mut indegree = vec![0usize; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, out) in self.adjacency.iter().enumerate() {
            for &(v, _) in out {
                indegree[v] += 1;
                preds[v].push(u);
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(u) = queue.pop_front() {
            removed[u] = true;
            for &(v, _) in &self.adjacency[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        let start = (0..n).find(|&v| !removed[v])?;
        // Every leftover vertex has a leftover predecessor; walk back until a
        // vertex repeats.
        let mut seen = HashMap::new();
        let mut walk = vec![start];
        let mut v = start;
        loop {
            seen.insert(v, walk.len() - 1);
            v = *preds[v].iter().find(|&&p| !removed[p]).expect("leftover predecessor");
            if let Some(&k) = seen.get(&v) {
                let mut cycle: Vec<CellId> = walk[k..].iter().rev().map(|&x| self.cell(x)).collect();
                cycle.push(cycle[0]);
                return Some(cycle);
            }
            walk.push(v);
        }
    }
}

/// The cell graph `𝒢(C)`: an edge `α -> β` for every stored coefficient
/// `∂_{β,α} ≠ 0`, weighted by that coefficient.
pub fn matching_graph(complex: &BasedChainComplex) -> CellGraph {
    build_graph(complex, &Matching::empty())
}

/// `𝒢(C)^M`: matched edges reversed and weighted by `-1 / ∂_{β,α}`.
pub fn morse_graph(complex: &BasedChainComplex, m: &Matching) -> CellGraph {
    build_graph(complex, m)
}

fn offsets(complex: &BasedChainComplex) -> Vec<usize> {
    let mut offsets = vec![0];
    for n in 0..=complex.max_degree() {
        offsets.push(offsets[n] + complex.dim(n));
    }
    offsets
}

fn build_graph(complex: &BasedChainComplex, m: &Matching) -> CellGraph {
    let offsets = offsets(complex);
    let mut adjacency = vec![Vec::new(); offsets[complex.max_degree() + 1]];
    let matched: HashSet<(CellId, CellId)> = m.pairs().iter().copied().collect();
    for n in 1..=complex.max_degree() {
        for (r, c, v) in complex.boundary(n).triplets() {
            let alpha = CellId::new(n, c);
            let beta = CellId::new(n - 1, r);
            let (a, b) = (offsets[n] + c, offsets[n - 1] + r);
            if matched.contains(&(alpha, beta)) {
                adjacency[b].push((a, -1.0 / v));
            } else {
                adjacency[a].push((b, v));
            }
        }
    }
    CellGraph { offsets, adjacency }
}

/// Check the three Morse conditions: every cell in at most one pair,
/// invertible incidence, and acyclic `𝒢(C)^M`. The first cycle found is
/// reported as its vertex sequence.
pub fn is_morse_matching(complex: &BasedChainComplex, m: &Matching) -> ValidationReport {
    let mut violations = Vec::new();
    let mut used: HashMap<CellId, usize> = HashMap::new();
    let exists = |c: CellId| c.degree <= complex.max_degree() && c.index < complex.dim(c.degree);
    for (k, &(alpha, beta)) in m.pairs().iter().enumerate() {
        if !exists(alpha) || !exists(beta) {
            violations.push(Violation {
                check: "unknown-cell".into(),
                location: format!("pair {k}"),
                magnitude: 0.0,
            });
            continue;
        }
        let loc = format!("({}, {})", complex.name(alpha), complex.name(beta));
        if alpha.degree != beta.degree + 1 {
            violations.push(Violation {
                check: "pair-degree".into(),
                location: loc,
                magnitude: 0.0,
            });
            continue;
        }
        for c in [alpha, beta] {
            if let Some(&first) = used.get(&c) {
                violations.push(Violation {
                    check: "disjointness".into(),
                    location: format!("{} in pairs {first} and {k}", complex.name(c)),
                    magnitude: 0.0,
                });
            } else {
                used.insert(c, k);
            }
        }
        if complex.incidence(alpha, beta) == 0.0 {
            violations.push(Violation {
                check: "non-invertible pair".into(),
                location: loc,
                magnitude: 0.0,
            });
        }
    }
    if violations.is_empty() {
        if let Some(cycle) = morse_graph(complex, m).find_cycle() {
            violations.push(Violation {
                check: "acyclicity".into(),
                location: cycle
                    .iter()
                    .map(|&c| complex.name(c))
                    .collect::<Vec<_>>()
                    .join(" -> "),
                magnitude: (cycle.len() - 1) as f64,
            });
        }
    }
    ValidationReport::new(violations)
}

pub(crate) fn ensure_morse(complex: &BasedChainComplex, m: &Matching) -> Result<()> {
    let report = is_morse_matching(complex, m);
    if report.ok {
        Ok(())
    } else {
        Err(Error::InvalidMatching(report))
    }
}

/// Path sums over `𝒢(C)^M`, optionally restricted to a window of degrees.
pub(crate) struct Flow<'a> {
    complex: &'a BasedChainComplex,
    /// For a bottom cell `β` of degree `d`: its partner `α` and `∂_{β,α}`.
    up: Vec<Vec<Option<(usize, f64)>>>,
    /// For a top cell `α` of degree `d`: its partner `β`.
    down: Vec<Vec<Option<usize>>>,
}

impl<'a> Flow<'a> {
    pub(crate) fn new(complex: &'a BasedChainComplex, m: &Matching) -> Self {
        let top = complex.max_degree();
        let mut up: Vec<Vec<Option<(usize, f64)>>> =
            (0..=top).map(|n| vec![None; complex.dim(n)]).collect();
        let mut down: Vec<Vec<Option<usize>>> =
            (0..=top).map(|n| vec![None; complex.dim(n)]).collect();
        for &(a, b) in m.pairs() {
            up[b.degree][b.index] = Some((a.index, complex.incidence(a, b)));
            down[a.degree][a.index] = Some(b.index);
        }
        Flow { complex, up, down }
    }

    fn successors(&self, x: CellId, lo: usize, hi: usize, out: &mut Vec<(CellId, f64)>) {
        out.clear();
        if x.degree > lo && x.degree >= 1 {
            let skip = self.down[x.degree][x.index];
            for &(r, v) in self.complex.boundary(x.degree).col(x.index) {
                if Some(r) != skip {
                    out.push((CellId::new(x.degree - 1, r), v));
                }
            }
        }
        if x.degree < hi {
            if let Some((a, v)) = self.up[x.degree][x.index] {
                out.push((CellId::new(x.degree + 1, a), -1.0 / v));
            }
        }
    }

    /// `Γ_{t,source}` for every `t` reachable from `source` by paths whose
    /// cells all have degree in `lo..=hi`. The source itself maps to 1.
    pub(crate) fn from(&self, source: CellId, lo: usize, hi: usize) -> Vec<(CellId, f64)> {
        // reverse postorder of the reachable subgraph
        let mut visited: HashSet<CellId> = HashSet::new();
        let mut order = Vec::new();
        let mut stack: Vec<(CellId, Vec<(CellId, f64)>, usize)> = Vec::new();
        let mut buf = Vec::new();
        self.successors(source, lo, hi, &mut buf);
        visited.insert(source);
        stack.push((source, buf.clone(), 0));
        while let Some(top) = stack.last_mut() {
            if top.2 < top.1.len() {
                let (y, _) = top.1[top.2];
                top.2 += 1;
                if visited.insert(y) {
                    self.successors(y, lo, hi, &mut buf);
                    stack.push((y, buf.clone(), 0));
                }
            } else {
                let (x, succ, _) = stack.pop().expect("non-empty stack");
                order.push((x, succ));
            }
        }
        // sums at or below CANCEL_TOL times the sum of absolute path indices
        // are cancellations
        let mut value: HashMap<CellId, (f64, f64)> = HashMap::with_capacity(order.len());
        value.insert(source, (1.0, 1.0));
        let mut out = Vec::with_capacity(order.len());
        for (x, succ) in order.into_iter().rev() {
            let (mut g, gabs) = value.get(&x).copied().unwrap_or((0.0, 0.0));
            if g.abs() <= CANCEL_TOL * gabs {
                g = 0.0;
            }
            out.push((x, g));
            if g != 0.0 {
                for (y, w) in succ {
                    let e = value.entry(y).or_insert((0.0, 0.0));
                    e.0 += g * w;
                    e.1 += gabs * w.abs();
                }
            }
        }
        out
    }
}

/// The summed index `Γ_{β,α}`: the sum of path indices over all paths from
/// `alpha` to `beta` in `𝒢(C)^M`. It is 1 for `alpha == beta` and 0 when no
/// path exists.
pub fn summed_index(
    complex: &BasedChainComplex,
    m: &Matching,
    alpha: CellId,
    beta: CellId,
) -> Result<f64> {
    for c in [alpha, beta] {
        if c.degree > complex.max_degree() || c.index >= complex.dim(c.degree) {
            return Err(Error::UnknownCell(c.to_string()));
        }
    }
    ensure_morse(complex, m)?;
    let flow = Flow::new(complex, m);
    Ok(flow
        .from(alpha, 0, complex.max_degree())
        .into_iter()
        .find(|&(c, _)| c == beta)
        .map_or(0.0, |(_, g)| g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> BasedChainComplex {
        BasedChainComplex::from_simplices(&[&[0, 1, 2]])
    }

    fn square() -> BasedChainComplex {
        BasedChainComplex::from_simplices(&[&[0, 1], &[1, 2], &[2, 3], &[0, 3]])
    }

    #[test]
    fn graph_edges() {
        assert_eq!(matching_graph(&BasedChainComplex::from_simplices(&[&[0, 1]])).num_edges(), 2);
        assert_eq!(matching_graph(&triangle()).num_edges(), 9);
    }

    #[test]
    fn edgeless_graph() {
        let mut b = crate::complex::ComplexBuilder::new();
        b.cell(0, "a");
        b.cell(1, "x");
        assert_eq!(matching_graph(&b.build().unwrap()).num_edges(), 0);
    }

    #[test]
    fn single_pair_is_valid() {
        let c = triangle();
        let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
        assert!(is_morse_matching(&c, &m).ok);
    }

    #[test]
    fn cycle_is_reported() {
        let c = square();
        let m = Matching::from_names(
            &c,
            &[("e0_1", "v1"), ("e1_2", "v2"), ("e2_3", "v3"), ("e0_3", "v0")],
        )
        .unwrap();
        let report = is_morse_matching(&c, &m);
        assert!(report.has("acyclicity"));
        let loc = &report.violations[0].location;
        assert_eq!(loc.split(" -> ").count(), 9);
    }

    #[test]
    fn non_face_pair_is_rejected() {
        let c = triangle();
        let m = Matching::from_names(&c, &[("e0_1", "v2")]).unwrap();
        assert!(is_morse_matching(&c, &m).has("non-invertible pair"));
    }

    #[test]
    fn reused_cell_is_rejected() {
        let c = triangle();
        let m = Matching::from_names(&c, &[("e0_1", "v1"), ("e1_2", "v1")]).unwrap();
        assert!(is_morse_matching(&c, &m).has("disjointness"));
    }

    #[test]
    fn summed_index_examples() {
        let c = triangle();
        let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
        let e01 = c.cell("e0_1").unwrap();
        let e02 = c.cell("e0_2").unwrap();
        assert_eq!(summed_index(&c, &m, e01, e01).unwrap(), 1.0);
        assert_eq!(summed_index(&c, &m, e01, e02).unwrap(), 1.0);
        let v0 = c.cell("v0").unwrap();
        let v1 = c.cell("v1").unwrap();
        assert_eq!(summed_index(&c, &m, v0, v1).unwrap(), 0.0);
    }

    #[test]
    fn matching_file_round_trip() {
        let c = triangle();
        let m = Matching::from_names(&c, &[("t0_1_2", "e0_1")]).unwrap();
        let f = m.to_file(&c);
        assert_eq!(serde_json::to_string(&f).unwrap(), r#"{"pairs":[["t0_1_2","e0_1"]]}"#);
        assert_eq!(Matching::from_file(&c, &f).unwrap(), m);
    }
}
