//! Topological loss and iterated optimal pairings.
//!
//! The loss of a retraction over a signal is `‖s - ΦΨs‖_W`. For a single
//! `(n+1, n)`-pair `(α, β)` it collapses to
//! `|s_β| / |∂_{β,α}| · ‖∂α‖_W`, so the best single pairing can be found in
//! one pass over the `(n+1)`-cells. Iterating that choice and replacing the
//! complex by its single-pair reduction gives a sequential Morse matching
//! that never pairs an `n`-cell downwards.
//!
//! Randomness is drawn from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `step` before each step, so step `j` of a run depends only on the
//! seed and `j`. Every step draws exactly two numbers.

mod working;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{BasedChainComplex, CellId, Signal};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::morse::{self, Matching, Retraction, SequentialMatching};
use working::WorkingComplex;

/// Header line of trajectory CSV files.
pub const TRAJECTORY_HEADER: &str = "# morsepack trajectory v1";

/// `‖s - ΦΨs‖` for a signal of degree `n`, with `psi[n]` and `phi[n]`.
pub fn topological_loss(
    complex: &BasedChainComplex,
    psi: &[Mat],
    phi: &[Mat],
    s: &Signal,
) -> Result<f64> {
    complex.check_signal(s)?;
    let n = s.degree;
    if n >= psi.len() || n >= phi.len() {
        return Err(Error::DegreeOutOfRange {
            degree: n,
            min: 0,
            max: psi.len().min(phi.len()).saturating_sub(1),
        });
    }
    if psi[n].ncols() != s.len() || phi[n].nrows() != s.len() || phi[n].ncols() != psi[n].nrows() {
        return Err(Error::DegreeMismatch {
            expected: s.len(),
            actual: psi[n].ncols(),
        });
    }
    let r = &s.values - &phi[n] * (&psi[n] * &s.values);
    Ok(complex.vector_norm(n, &r))
}

/// Sum of [`topological_loss`] over a set of signals.
pub fn topological_loss_set(
    complex: &BasedChainComplex,
    psi: &[Mat],
    phi: &[Mat],
    signals: &[Signal],
) -> Result<f64> {
    signals
        .iter()
        .map(|s| topological_loss(complex, psi, phi, s))
        .sum()
}

/// Loss of a retraction over a signal.
pub fn retraction_loss(r: &Retraction, s: &Signal) -> Result<f64> {
    topological_loss(&r.source, &r.psi, &r.phi, s)
}

fn pair_pivot(complex: &BasedChainComplex, alpha: CellId, beta: CellId) -> Result<f64> {
    for c in [alpha, beta] {
        if c.degree > complex.max_degree() || c.index >= complex.dim(c.degree) {
            return Err(Error::UnknownCell(c.to_string()));
        }
    }
    if alpha.degree != beta.degree + 1 {
        return Err(Error::DegreeMismatch {
            expected: beta.degree + 1,
            actual: alpha.degree,
        });
    }
    let p = complex.incidence(alpha, beta);
    if p == 0.0 {
        return Err(Error::ZeroIncidence {
            alpha: complex.name(alpha).to_string(),
            beta: complex.name(beta).to_string(),
        });
    }
    Ok(p)
}

/// `|s_β| / |∂_{β,α}| · ‖∂α‖_W` for a signal on the degree of `beta`.
pub fn single_pairing_loss(
    complex: &BasedChainComplex,
    alpha: CellId,
    beta: CellId,
    s: &Signal,
) -> Result<f64> {
    let p = pair_pivot(complex, alpha, beta)?;
    complex.check_signal(s)?;
    if s.degree != beta.degree {
        return Err(Error::DegreeMismatch {
            expected: beta.degree,
            actual: s.degree,
        });
    }
    let col = complex.boundary(alpha.degree).col(alpha.index);
    let norm = complex
        .inner_product_of(beta.degree)
        .sparse_norm_sq(col)
        .max(0.0)
        .sqrt();
    Ok(s.values[beta.index].abs() / p.abs() * norm)
}

/// `‖(1 - Ψ†Φ†) s‖` for the single pair `(alpha, beta)` and a signal on the
/// degree of `alpha`: `|s_α| / |∂†_{α,β}| · ‖∂†β‖_W`. Requires an
/// orthogonal base.
pub fn dual_pairing_loss(
    complex: &BasedChainComplex,
    alpha: CellId,
    beta: CellId,
    s: &Signal,
) -> Result<f64> {
    if !complex.is_orthogonal_base() {
        return Err(Error::NonOrthogonalBase);
    }
    let p = pair_pivot(complex, alpha, beta)?;
    complex.check_signal(s)?;
    if s.degree != alpha.degree {
        return Err(Error::DegreeMismatch {
            expected: alpha.degree,
            actual: s.degree,
        });
    }
    let w_hi = complex.inner_product_of(alpha.degree);
    let b = complex.boundary(alpha.degree);
    let row: Vec<(usize, f64)> = (0..b.ncols())
        .filter_map(|t| {
            let v = b.get(beta.index, t);
            (v != 0.0).then_some((t, v))
        })
        .collect();
    Ok(dual_score(s.values[alpha.index].abs(), w_hi.weight(alpha.index), p, &row, |t| {
        w_hi.weight(t)
    }))
}

/// `|s_α| w_α / |p| · sqrt(Σ_τ ∂_{β,τ}² / w_τ)`: the dual loss on a diagonal
/// inner product, with the `w_β` factors cancelled.
fn dual_score(s_alpha: f64, w_alpha: f64, pivot: f64, beta_row: &[(usize, f64)], w: impl Fn(usize) -> f64) -> f64 {
    let co: f64 = beta_row.iter().map(|&(t, v)| v * v / w(t)).sum();
    s_alpha * w_alpha / pivot.abs() * co.sqrt()
}

/// How the next pair is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Optimal,
    Random,
}

/// Which loss is minimised: `‖s - ΦΨs‖` for signals on `C_n`, or the dual
/// `‖s - Ψ†Φ†s‖` for signals on `C_{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossSide {
    #[default]
    Primal,
    Dual,
}

/// Parameters of an iterated pairing run. Pairs are always `(n+1, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub degree: usize,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub loss_side: LossSide,
}

impl OptimizerConfig {
    pub fn new(degree: usize, steps: usize, seed: u64) -> Self {
        OptimizerConfig {
            degree,
            steps,
            seed,
            mode: Mode::Optimal,
            loss_side: LossSide::Primal,
        }
    }

    pub fn random(mut self) -> Self {
        self.mode = Mode::Random;
        self
    }

    pub fn dual(mut self) -> Self {
        self.loss_side = LossSide::Dual;
        self
    }

    fn signal_degree(&self) -> usize {
        match self.loss_side {
            LossSide::Primal => self.degree,
            LossSide::Dual => self.degree + 1,
        }
    }
}

/// The generator used for step `step` of a run seeded with `seed`.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng
}

/// One step of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRecord {
    /// 1-based step number.
    pub step: usize,
    pub alpha: String,
    pub beta: String,
    /// Loss of this pairing on the current (already compressed) signal.
    pub loss_conditional: f64,
    /// Loss of the whole sequence so far on the original complex.
    pub loss_total: f64,
    /// Cell counts per degree after the step.
    pub dims: Vec<usize>,
}

/// Result of an iterated pairing run.
#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub source: BasedChainComplex,
    pub reduced: BasedChainComplex,
    /// One single-pair stage per step, in source indices.
    pub matching: SequentialMatching,
    /// The signals on the reduced complex.
    pub compressed: Vec<Signal>,
    pub trajectory: Vec<LossRecord>,
    /// Set when the run ran out of admissible pairs before `steps`.
    pub stopped_early: bool,
}

impl OptimizationRun {
    /// The dense retraction of the whole sequence.
    pub fn retraction(&self) -> Result<Retraction> {
        morse::sequential_reduce(&self.source, &self.matching)
    }

    /// `Φ(compressed)` on the source complex. The runs only pair `(n+1, n)`,
    /// so `Φ_n` is the inclusion of the surviving cells.
    pub fn reconstructed(&self) -> Vec<Signal> {
        let keep_of = |n: usize| -> Vec<usize> {
            self.reduced
                .cell_names(n)
                .iter()
                .map(|name| self.source.cell(name).expect("reduced cells come from the source").index)
                .collect()
        };
        self.compressed
            .iter()
            .map(|t| {
                let keep = keep_of(t.degree);
                let mut v = Vector::zeros(self.source.dim(t.degree));
                for (k, &i) in keep.iter().enumerate() {
                    v[i] = t.values[k];
                }
                Signal::from_vector(t.degree, v)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_trajectory_csv(out, &self.trajectory)
    }
}

/// Write a trajectory as CSV with a versioned header comment.
pub fn write_trajectory_csv<W: Write>(mut out: W, records: &[LossRecord]) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}").map_err(|e| Error::io("<trajectory>", e))?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["step", "alpha", "beta", "loss_conditional", "loss_total", "dims"])
        .map_err(csv_err)?;
    for r in records {
        let dims = r.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            r.step.to_string(),
            r.alpha.clone(),
            r.beta.clone(),
            r.loss_conditional.to_string(),
            r.loss_total.to_string(),
            dims,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))?;
    Ok(())
}

/// Candidate bookkeeping for the argmin with exact ties.
struct Argmin {
    best: f64,
    cells: Vec<(usize, Vec<usize>)>,
}

impl Argmin {
    fn new() -> Self {
        Argmin {
            best: f64::INFINITY,
            cells: Vec::new(),
        }
    }

    fn offer(&mut self, cell: usize, value: f64, faces: &[usize]) {
        if value < self.best {
            self.best = value;
            self.cells.clear();
        }
        if value == self.best {
            self.cells.push((cell, faces.to_vec()));
        }
    }

    /// Uniform among argmin cells, then uniform among that cell's argmin
    /// faces. This has the same law as drawing a face per cell first.
    fn draw(self, rng: &mut ChaCha8Rng) -> Option<(usize, usize, f64)> {
        if self.cells.is_empty() {
            return None;
        }
        let i = rng.random_range(0..self.cells.len());
        let (cell, faces) = &self.cells[i];
        let j = rng.random_range(0..faces.len());
        Some((*cell, faces[j], self.best))
    }
}

/// Scan the `(n+1)`-cells of a complex view and return the best pair under
/// `score(face value sum, |pivot|, cell, face)`.
fn scan_optimal<F>(cells: impl Iterator<Item = (usize, Vec<(usize, f64)>)>, mut score: F, rng: &mut ChaCha8Rng) -> Option<(usize, usize, f64)>
where
    F: FnMut(usize, usize, f64) -> f64,
{
    let mut arg = Argmin::new();
    let mut faces = Vec::new();
    for (tau, col) in cells {
        let mut best = f64::INFINITY;
        faces.clear();
        for &(xi, v) in &col {
            let x = score(tau, xi, v);
            if x < best {
                best = x;
                faces.clear();
            }
            if x == best {
                faces.push(xi);
            }
        }
        if !faces.is_empty() {
            arg.offer(tau, best, &faces);
        }
    }
    arg.draw(rng)
}

fn check_signals(complex: &BasedChainComplex, signals: &[Signal], degree: usize) -> Result<()> {
    if signals.is_empty() {
        return Err(Error::Config("at least one signal is required".into()));
    }
    for s in signals {
        complex.check_signal(s)?;
        if s.degree != degree {
            return Err(Error::DegreeMismatch {
                expected: degree,
                actual: s.degree,
            });
        }
    }
    Ok(())
}

/// The `(n+1, n)`-pair minimising the summed single-pairing loss
/// over `signals` (all on `C_n`). Exact ties are broken with `rng`.
pub fn optimal_pairing(
    complex: &BasedChainComplex,
    signals: &[Signal],
    rng: &mut ChaCha8Rng,
) -> Result<(CellId, CellId)> {
    let n = signals.first().map_or(0, |s| s.degree);
    check_signals(complex, signals, n)?;
    if n >= complex.max_degree() {
        return Err(Error::NoPairing { degree: n });
    }
    let mass = face_mass(signals, complex.dim(n));
    let b = complex.boundary(n + 1);
    let w = complex.inner_product_of(n);
    let cells = (0..b.ncols()).map(|t| (t, b.col(t).to_vec()));
    let mut norm_cache: (usize, f64) = (usize::MAX, 0.0);
    let pick = scan_optimal(
        cells,
        |tau, xi, v| {
            if norm_cache.0 != tau {
                norm_cache = (tau, w.sparse_norm_sq(b.col(tau)).max(0.0).sqrt());
            }
            mass[xi] / v.abs() * norm_cache.1
        },
        rng,
    );
    let (a, f, _) = pick.ok_or(Error::NoPairing { degree: n })?;
    Ok((CellId::new(n + 1, a), CellId::new(n, f)))
}

fn face_mass(signals: &[Signal], dim: usize) -> Vec<f64> {
    let mut mass = vec![0.0; dim];
    for s in signals {
        for (m, v) in mass.iter_mut().zip(s.values.iter()) {
            *m += v.abs();
        }
    }
    mass
}

struct Trajectory<'a> {
    work: WorkingComplex<'a>,
    config: OptimizerConfig,
    original: Vec<Vector>,
    current: Vec<Vector>,
}

impl<'a> Trajectory<'a> {
    fn signal_degree(&self) -> usize {
        self.config.signal_degree()
    }

    fn loss_total(&self) -> f64 {
        let n = self.signal_degree();
        let c = self.work.source();
        self.original
            .iter()
            .zip(&self.current)
            .map(|(s, t)| c.vector_norm(n, &(s - t)))
            .sum()
    }

    fn mass(&self, i: usize) -> f64 {
        self.current.iter().map(|t| t[i].abs()).sum()
    }

    fn select(&mut self, rng: &mut ChaCha8Rng) -> Option<(usize, usize, f64)> {
        let n = self.config.degree;
        let cells: Vec<usize> = self.work.alive_cells(n + 1).collect();
        match (self.config.mode, self.config.loss_side) {
            (Mode::Random, _) => {
                let total: usize = cells
                    .iter()
                    .map(|&t| self.work.column(CellId::new(n + 1, t)).len())
                    .sum();
                let k = rng.random_range(0..total.max(1));
                // second draw keeps the per-step count fixed
                let _ = rng.random_range(0..1usize);
                if total == 0 {
                    return None;
                }
                let mut k = k;
                for &t in &cells {
                    let col = self.work.column(CellId::new(n + 1, t));
                    if k < col.len() {
                        let face = col[k].0;
                        let loss = self.pair_loss(CellId::new(n + 1, t), CellId::new(n, face));
                        return Some((t, face, loss));
                    }
                    k -= col.len();
                }
                unreachable!("index within total")
            }
            (Mode::Optimal, LossSide::Primal) => {
                let norms: Vec<f64> = cells
                    .iter()
                    .map(|&t| self.work.boundary_norm(CellId::new(n + 1, t)))
                    .collect();
                let mass: Vec<f64> = (0..self.work.source().dim(n)).map(|i| self.mass(i)).collect();
                let work = &self.work;
                let view = cells
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| (k, work.column(CellId::new(n + 1, t)).to_vec()));
                scan_optimal(view, |k, xi, v| mass[xi] / v.abs() * norms[k], rng)
                    .map(|(k, f, l)| (cells[k], f, l))
            }
            (Mode::Optimal, LossSide::Dual) => {
                let w = self.work.source().inner_product_of(n + 1);
                let rows: std::collections::HashMap<usize, Vec<(usize, f64)>> = cells
                    .iter()
                    .flat_map(|&t| self.work.column(CellId::new(n + 1, t)).iter().map(|e| e.0))
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .map(|f| (f, self.work.coface_row(CellId::new(n, f))))
                    .collect();
                let work = &self.work;
                let view = cells
                    .iter()
                    .map(|&t| (t, work.column(CellId::new(n + 1, t)).to_vec()));
                let current = &self.current;
                scan_optimal(
                    view,
                    |t, f, v| {
                        let mass: f64 = current.iter().map(|s| s[t].abs()).sum();
                        dual_score(mass, w.weight(t), v, &rows[&f], |x| w.weight(x))
                    },
                    rng,
                )
            }
        }
    }

    fn pair_loss(&mut self, alpha: CellId, beta: CellId) -> f64 {
        let v = self.work.incidence(alpha, beta);
        match self.config.loss_side {
            LossSide::Primal => self.mass(beta.index) / v.abs() * self.work.boundary_norm(alpha),
            LossSide::Dual => {
                let w = self.work.source().inner_product_of(alpha.degree);
                let row = self.work.coface_row(beta);
                dual_score(self.mass(alpha.index), w.weight(alpha.index), v, &row, |x| w.weight(x))
            }
        }
    }

    fn apply(&mut self, alpha: CellId, beta: CellId) {
        let effect = self.work.pair(alpha, beta);
        let p = effect.pivot;
        match self.config.loss_side {
            LossSide::Primal => {
                for t in &mut self.current {
                    let sb = t[beta.index];
                    for &(tau, a) in &effect.alpha_col {
                        t[tau] += -a / p * sb;
                    }
                    t[beta.index] = 0.0;
                }
            }
            LossSide::Dual => {
                let w = self.work.source().inner_product_of(alpha.degree);
                let wa = w.weight(alpha.index);
                for t in &mut self.current {
                    let sa = t[alpha.index];
                    for &(sigma, v) in &effect.beta_row {
                        t[sigma] -= v * wa / (p * w.weight(sigma)) * sa;
                    }
                    t[alpha.index] = 0.0;
                }
            }
        }
    }
}

/// Optimal or random iterated pairing: `config.steps` single pairings of
/// type `(n+1, n)`, each followed by the single-pair reduction of the complex
/// and of the signals. Stops early when no admissible pair is left.
pub fn run_pairings(
    complex: &BasedChainComplex,
    signals: &[Signal],
    config: &OptimizerConfig,
) -> Result<OptimizationRun> {
    let n = config.degree;
    if n >= complex.max_degree() {
        return Err(Error::DegreeOutOfRange {
            degree: n,
            min: 0,
            max: complex.max_degree().saturating_sub(1),
        });
    }
    if config.loss_side == LossSide::Dual && !complex.is_orthogonal_base() {
        return Err(Error::NonOrthogonalBase);
    }
    check_signals(complex, signals, config.signal_degree())?;
    let mut traj = Trajectory {
        work: WorkingComplex::new(complex),
        config: *config,
        original: signals.iter().map(|s| s.values.clone()).collect(),
        current: signals.iter().map(|s| s.values.clone()).collect(),
    };
    let mut matching = SequentialMatching::default();
    let mut trajectory = Vec::new();
    let mut stopped_early = false;
    for step in 0..config.steps {
        let mut rng = step_rng(config.seed, step);
        let Some((a, f, loss)) = traj.select(&mut rng) else {
            stopped_early = true;
            break;
        };
        let (alpha, beta) = (CellId::new(n + 1, a), CellId::new(n, f));
        traj.apply(alpha, beta);
        matching.push(Matching::new(vec![(alpha, beta)]));
        trajectory.push(LossRecord {
            step: step + 1,
            alpha: complex.name(alpha).to_string(),
            beta: complex.name(beta).to_string(),
            loss_conditional: loss,
            loss_total: traj.loss_total(),
            dims: traj.work.dims().to_vec(),
        });
    }
    let (reduced, keep) = traj.work.materialize();
    let m = config.signal_degree();
    let compressed = traj
        .current
        .iter()
        .map(|t| Signal::from_vector(m, Vector::from_iterator(keep[m].len(), keep[m].iter().map(|&i| t[i]))))
        .collect();
    Ok(OptimizationRun {
        source: complex.clone(),
        reduced,
        matching,
        compressed,
        trajectory,
        stopped_early,
    })
}

/// [`run_pairings`] with optimal selection.
pub fn k_optimal_pairings(
    complex: &BasedChainComplex,
    signals: &[Signal],
    config: &OptimizerConfig,
) -> Result<OptimizationRun> {
    run_pairings(complex, signals, &OptimizerConfig { mode: Mode::Optimal, ..*config })
}

/// [`run_pairings`] with uniformly random selection among all admissible
/// `(n+1, n)`-pairs.
pub fn random_pairings(
    complex: &BasedChainComplex,
    signals: &[Signal],
    config: &OptimizerConfig,
) -> Result<OptimizationRun> {
    run_pairings(complex, signals, &OptimizerConfig { mode: Mode::Random, ..*config })
}

/// Result of a reduction without a signal.
#[derive(Debug, Clone)]
pub struct ReductionRun {
    pub source: BasedChainComplex,
    pub reduced: BasedChainComplex,
    pub matching: SequentialMatching,
    pub steps: usize,
}

impl ReductionRun {
    /// The dense retraction of the whole sequence.
    pub fn retraction(&self) -> Result<Retraction> {
        morse::sequential_reduce(&self.source, &self.matching)
    }
}

fn greedy_reduce(complex: &BasedChainComplex, skip_degree: Option<usize>) -> ReductionRun {
    let mut work = WorkingComplex::new(complex);
    let top = complex.max_degree();
    let mut cursor = vec![0usize; top + 1];
    let mut matching = SequentialMatching::default();
    'outer: loop {
        for d in 1..=top {
            if Some(d) == skip_degree {
                continue;
            }
            while cursor[d] < complex.dim(d) {
                let alpha = CellId::new(d, cursor[d]);
                if work.is_alive(alpha) {
                    if let Some(&(r, _)) = work.column(alpha).first() {
                        let beta = CellId::new(d - 1, r);
                        work.pair(alpha, beta);
                        matching.push(Matching::new(vec![(alpha, beta)]));
                        continue 'outer;
                    }
                }
                cursor[d] += 1;
            }
        }
        break;
    }
    let (reduced, _) = work.materialize();
    ReductionRun {
        source: complex.clone(),
        reduced,
        steps: matching.len(),
        matching,
    }
}

/// Pair cells until every boundary vanishes. Pairs are taken lowest degree
/// first, then by cell index. The reduced complex has the Betti numbers as
/// dimensions.
pub fn full_reduce(complex: &BasedChainComplex) -> ReductionRun {
    greedy_reduce(complex, None)
}

/// Pair cells until none remain, never matching an `n`-cell down to an
/// `(n-1)`-cell.
pub fn free_reduce(complex: &BasedChainComplex, n: usize) -> ReductionRun {
    greedy_reduce(complex, Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> BasedChainComplex {
        BasedChainComplex::from_simplices(&[&[0, 1, 2]])
    }

    fn edge_signal(values: [f64; 3]) -> Signal {
        Signal::new(1, values.to_vec())
    }

    #[test]
    fn compact_loss_examples() {
        let c = triangle();
        let f = c.cell("t0_1_2").unwrap();
        let e01 = c.cell("e0_1").unwrap();
        let e02 = c.cell("e0_2").unwrap();
        let s = Signal::basis(&c, e02);
        assert!((single_pairing_loss(&c, f, e02, &s).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        let s = edge_signal([2.0, 0.0, 0.0]);
        assert!((single_pairing_loss(&c, f, e01, &s).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(single_pairing_loss(&c, f, e01, &edge_signal([0.0, 5.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_in_loss() {
        let c = triangle()
            .with_inner_products(vec![
                crate::InnerProduct::identity(3),
                crate::InnerProduct::Diagonal(vec![4.0, 1.0, 1.0]),
                crate::InnerProduct::identity(1),
            ])
            .unwrap();
        let (f, e01) = (c.cell("t0_1_2").unwrap(), c.cell("e0_1").unwrap());
        let s = Signal::basis(&c, e01);
        assert!((single_pairing_loss(&c, f, e01, &s).unwrap() - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dual_loss_example() {
        let c = triangle();
        let (f, e01) = (c.cell("t0_1_2").unwrap(), c.cell("e0_1").unwrap());
        let s = Signal::basis(&c, f);
        assert_eq!(dual_pairing_loss(&c, f, e01, &s).unwrap(), 1.0);
        assert_eq!(dual_pairing_loss(&c, f, e01, &Signal::zeros(2, 1)).unwrap(), 0.0);
    }

    #[test]
    fn optimal_on_triangle() {
        let c = triangle();
        let s = edge_signal([3.0, 1.0, 2.0]);
        for seed in 0..5 {
            let (a, b) = optimal_pairing(&c, std::slice::from_ref(&s), &mut step_rng(seed, 0)).unwrap();
            assert_eq!((c.name(a), c.name(b)), ("t0_1_2", "e0_2"));
        }
        let run = k_optimal_pairings(&c, &[s], &OptimizerConfig::new(1, 1, 0)).unwrap();
        assert_eq!(run.trajectory.len(), 1);
        assert_eq!(run.trajectory[0].beta, "e0_2");
        assert!((run.trajectory[0].loss_conditional - 3f64.sqrt()).abs() < 1e-15);
        assert!((run.trajectory[0].loss_total - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exhaustion_stops_early() {
        let c = triangle();
        let run = k_optimal_pairings(&c, &[edge_signal([1.0, 1.0, 1.0])], &OptimizerConfig::new(1, 10, 3)).unwrap();
        assert_eq!(run.trajectory.len(), 1);
        assert!(run.stopped_early);
        let run = k_optimal_pairings(&c, &[edge_signal([1.0, 1.0, 1.0])], &OptimizerConfig::new(1, 0, 3)).unwrap();
        assert!(run.trajectory.is_empty() && !run.stopped_early);
        assert_eq!(run.reduced.dims(), c.dims());
    }

    #[test]
    fn no_pairing_error() {
        let c = BasedChainComplex::from_simplices(&[&[0, 1]]);
        let s = Signal::zeros(1, 1);
        assert!(matches!(
            optimal_pairing(&c, &[s], &mut step_rng(0, 0)),
            Err(Error::NoPairing { .. })
        ));
    }

    #[test]
    fn reductions_reach_homology() {
        let c = triangle();
        let r = full_reduce(&c);
        assert_eq!(r.steps, 3);
        assert_eq!(r.reduced.dims(), vec![1, 0, 0]);
        let hollow = BasedChainComplex::from_simplices(&[&[0, 1], &[1, 2], &[0, 2]]);
        let r = full_reduce(&hollow);
        assert_eq!(r.steps, 2);
        assert_eq!(r.reduced.dims(), vec![1, 1]);
        let r = free_reduce(&c, 1);
        assert_eq!(r.matching.starts_in(1), 0);
        assert_eq!(r.reduced.dims(), vec![3, 2, 0]);
    }

    #[test]
    fn csv_has_versioned_header() {
        let c = triangle();
        let run = k_optimal_pairings(&c, &[edge_signal([3.0, 1.0, 2.0])], &OptimizerConfig::new(1, 1, 0)).unwrap();
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
        assert_eq!(lines.next(), Some("step,alpha,beta,loss_conditional,loss_total,dims"));
        assert!(lines.next().unwrap().starts_with("1,t0_1_2,e0_2,1.7320508075688772,"));
    }
}
