//! Seeded comparison of optimal and random pairing trajectories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_grid_complex, generate_signal, GridSpec, SignalKind};
use crate::complex::{self, BasedChainComplex, Signal};
use crate::error::{Error, Result};
use crate::hodge::{hodge_basis, HodgeComponent};
use crate::morse::Retraction;
use crate::optimize::{run_pairings, write_trajectory_csv, LossRecord, Mode, OptimizerConfig};

/// Environment variable that replaces the base seed of an experiment.
pub const SEED_ENV: &str = "MORSEPACK_SEED";

const SUMMARY_HEADER: &str = "# morsepack summary v1";
const PROJECTION_HEADER: &str = "# morsepack projection v1";

/// Where the complex comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Grid(GridSpec),
    /// A complex file; relative paths are resolved against the spec file.
    File(PathBuf),
}

fn default_degree() -> usize {
    1
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Optimal, Mode::Random]
}

fn yes() -> bool {
    true
}

/// An experiment description, read from JSON.
///
/// The complex and the signal are fixed; each trial seed drives the pair
/// selection of one trajectory per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub generator: Generator,
    #[serde(default = "SignalKind::normal")]
    pub signal: SignalKind,
    #[serde(default)]
    pub signal_seed: u64,
    /// Overrides `signal`; resolved like [`Generator::File`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_file: Option<PathBuf>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub k_max: usize,
    pub n_trials: usize,
    /// Trial `i` uses `seed + i` unless `seeds` is given.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// Write the Hodge projection table of the first trajectory.
    #[serde(default = "yes")]
    pub projection: bool,
}

impl ExperimentSpec {
    pub fn grid(rows: usize, cols: usize, signal: SignalKind, k_max: usize, n_trials: usize) -> Self {
        ExperimentSpec {
            generator: Generator::Grid(GridSpec::new(rows, cols, 0)),
            signal,
            signal_seed: 0,
            signal_file: None,
            degree: 1,
            k_max,
            n_trials,
            seed: 0,
            seeds: None,
            modes: default_modes(),
            projection: true,
        }
    }

    /// Read a spec and resolve its relative paths against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Generator::File(p) = &mut spec.generator {
            resolve(p);
        }
        if let Some(p) = &mut spec.signal_file {
            resolve(p);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if let Some(s) = &self.seeds {
            if s.len() != self.n_trials {
                return Err(Error::Config(format!(
                    "{} seeds given for {} trials",
                    s.len(),
                    self.n_trials
                )));
            }
        }
        Ok(())
    }

    /// The trial seeds.
    pub fn trial_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.n_trials as u64).map(|i| self.seed.wrapping_add(i)).collect(),
        }
    }

    fn inputs(&self) -> Result<(BasedChainComplex, Signal)> {
        let (complex, coords) = match &self.generator {
            Generator::Grid(g) => {
                let grid = generate_grid_complex(g)?;
                (grid.complex, Some(grid.coords))
            }
            Generator::File(p) => (complex::load(p)?, None),
        };
        let signal = match &self.signal_file {
            Some(p) => Signal::load(&complex, p)?,
            None if self.degree == 1 => {
                generate_signal(&complex, coords.as_deref(), self.signal, self.signal_seed)?
            }
            None => {
                return Err(Error::Config(format!(
                    "generated signals live on 1-cells; give a signal_file for degree {}",
                    self.degree
                )))
            }
        };
        if signal.degree != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                actual: signal.degree,
            });
        }
        Ok((complex, signal))
    }
}

/// Apply an override of the base seed (the value of [`SEED_ENV`]). An
/// override discards any explicit seed list.
pub fn resolve_seeds(spec: &ExperimentSpec, override_seed: Option<&str>) -> Result<ExperimentSpec> {
    let mut spec = spec.clone();
    if let Some(v) = override_seed {
        let seed = v
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        spec.seed = seed;
        spec.seeds = None;
    }
    Ok(spec)
}

/// One trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrialCurve {
    pub seed: u64,
    /// `loss_total` after each realized step.
    pub losses: Vec<f64>,
    pub stopped_early: bool,
    #[serde(skip)]
    pub records: Vec<LossRecord>,
}

/// Aggregate over the trials of one mode.
#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub mode: Mode,
    /// Mean loss at each step over the trials that reached it.
    pub mean: Vec<f64>,
    /// Sample standard error of the mean (0 with fewer than two trials).
    pub stderr: Vec<f64>,
    /// Number of trials that reached each step.
    pub count: Vec<usize>,
    pub trials: Vec<TrialCurve>,
}

impl ModeReport {
    fn aggregate(mode: Mode, trials: Vec<TrialCurve>) -> Self {
        let len = trials.iter().map(|t| t.losses.len()).max().unwrap_or(0);
        let (mut mean, mut stderr, mut count) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..len {
            let xs: Vec<f64> = trials.iter().filter_map(|t| t.losses.get(k).copied()).collect();
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let se = if xs.len() > 1 {
                let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            mean.push(m);
            stderr.push(se);
            count.push(xs.len());
        }
        ModeReport {
            mode,
            mean,
            stderr,
            count,
            trials,
        }
    }

    pub fn terminal_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }
}

/// One row of a Hodge projection table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub index: usize,
    pub component: HodgeComponent,
    /// Coefficient of the signal on the basis vector.
    pub signal: f64,
    /// Coefficient of the reconstruction on the basis vector.
    pub reconstructed: f64,
    pub differs: bool,
}

/// Coefficients of a signal and its reconstruction in a Hodge basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionTable {
    pub degree: usize,
    /// Absolute threshold used for `differs`.
    pub tolerance: f64,
    pub rows: Vec<ProjectionRow>,
}

impl ProjectionTable {
    pub fn differing(&self) -> impl Iterator<Item = &ProjectionRow> {
        self.rows.iter().filter(|r| r.differs)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{PROJECTION_HEADER}").map_err(|e| Error::io("<projection>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "component", "signal", "reconstructed", "differs"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                r.component.label().to_string(),
                r.signal.to_string(),
                r.reconstructed.to_string(),
                r.differs.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<projection>", e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Compare `s` and `reconstructed` on every Hodge basis vector of their
/// degree. A component differs when the coefficients are more than
/// `1e-8 * max(1, ‖s‖)` apart.
pub fn project_signals(
    complex: &BasedChainComplex,
    s: &Signal,
    reconstructed: &Signal,
) -> Result<ProjectionTable> {
    complex.check_signal(s)?;
    complex.check_signal(reconstructed)?;
    if s.degree != reconstructed.degree {
        return Err(Error::DegreeMismatch {
            expected: s.degree,
            actual: reconstructed.degree,
        });
    }
    let n = s.degree;
    let basis = hodge_basis(complex)?;
    let w = complex.inner_product_of(n);
    let tolerance = 1e-8 * w.norm(&s.values).max(1.0);
    let rows = basis
        .vectors(n)
        .into_iter()
        .enumerate()
        .map(|(index, (component, b))| {
            let a = w.inner(&b, &s.values);
            let r = w.inner(&b, &reconstructed.values);
            ProjectionRow {
                index,
                component,
                signal: a,
                reconstructed: r,
                differs: (a - r).abs() > tolerance,
            }
        })
        .collect();
    Ok(ProjectionTable {
        degree: n,
        tolerance,
        rows,
    })
}

/// [`project_signals`] for `ΦΨs`.
pub fn project_report(
    complex: &BasedChainComplex,
    s: &Signal,
    retraction: &Retraction,
) -> Result<ProjectionTable> {
    if retraction.source.dims() != complex.dims() {
        return Err(Error::Config("retraction is over a different complex".into()));
    }
    project_signals(complex, s, &retraction.reconstruct(s)?)
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    /// The spec as run, with seeds resolved.
    pub spec: ExperimentSpec,
    pub version: String,
    pub dims: Vec<usize>,
    pub signal_norm: f64,
    pub modes: Vec<ModeReport>,
    /// Kept out of `report.json` so the report replays byte for byte.
    #[serde(skip)]
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub projection: Option<ProjectionTable>,
}

impl ExperimentReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Write `report.json`, `timing.json`, `summary.csv`, one trajectory CSV
    /// per mode and seed, and `projection.csv` when available.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, bytes: &[u8]| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
        };
        write("report.json", self.to_json()?.as_bytes())?;
        let timing = serde_json::json!({ "wall_time_secs": self.wall_time_secs });
        write("timing.json", serde_json::to_string_pretty(&timing)?.as_bytes())?;
        let mut buf = Vec::new();
        self.write_summary(&mut buf)?;
        write("summary.csv", &buf)?;
        for m in &self.modes {
            for t in &m.trials {
                let mut buf = Vec::new();
                write_trajectory_csv(&mut buf, &t.records)?;
                write(&format!("{}_seed{}.csv", mode_name(m.mode), t.seed), &buf)?;
            }
        }
        if let Some(p) = &self.projection {
            let mut buf = Vec::new();
            p.write_csv(&mut buf)?;
            write("projection.csv", &buf)?;
        }
        Ok(())
    }

    /// Per-step mean, standard error and trial count for every mode.
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SUMMARY_HEADER}").map_err(|e| Error::io("<summary>", e))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        for m in &self.modes {
            let name = mode_name(m.mode);
            header.extend([format!("{name}_mean"), format!("{name}_stderr"), format!("{name}_count")]);
        }
        w.write_record(&header).map_err(csv_err)?;
        let len = self.modes.iter().map(|m| m.mean.len()).max().unwrap_or(0);
        for k in 0..len {
            let mut row = vec![(k + 1).to_string()];
            for m in &self.modes {
                match m.mean.get(k) {
                    Some(x) => row.extend([x.to_string(), m.stderr[k].to_string(), m.count[k].to_string()]),
                    None => row.extend([String::new(), String::new(), "0".to_string()]),
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<summary>", e))
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Optimal => "optimal",
        Mode::Random => "random",
    }
}

/// Run every mode for every trial seed, in parallel, and aggregate the loss
/// curves in `(mode, seed)` order. The base seed may be replaced through
/// [`SEED_ENV`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let env = std::env::var(SEED_ENV).ok();
    let spec = resolve_seeds(spec, env.as_deref())?;
    spec.validate()?;
    let start = Instant::now();
    let (complex, signal) = spec.inputs()?;
    let seeds = spec.trial_seeds();
    let jobs: Vec<(Mode, u64)> = spec
        .modes
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let signals = std::slice::from_ref(&signal);
    let runs: Vec<_> = jobs
        .par_iter()
        .map(|&(mode, seed)| {
            let config = OptimizerConfig {
                mode,
                ..OptimizerConfig::new(spec.degree, spec.k_max, seed)
            };
            run_pairings(&complex, signals, &config)
        })
        .collect::<Result<_>>()?;
    let projection = match runs.first() {
        Some(run) if spec.projection => {
            let rec = run.reconstructed().remove(0);
            Some(project_signals(&complex, &signal, &rec)?)
        }
        _ => None,
    };
    let mut runs = runs.into_iter();
    let modes = spec
        .modes
        .iter()
        .map(|&mode| {
            let trials = seeds
                .iter()
                .zip(runs.by_ref())
                .map(|(&seed, run)| TrialCurve {
                    seed,
                    losses: run.trajectory.iter().map(|r| r.loss_total).collect(),
                    stopped_early: run.stopped_early,
                    records: run.trajectory,
                })
                .collect();
            ModeReport::aggregate(mode, trials)
        })
        .collect();
    Ok(ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        dims: complex.dims(),
        signal_norm: complex.norm(signal.degree, &signal)?,
        modes,
        wall_time_secs: start.elapsed().as_secs_f64(),
        projection,
        spec,
    })
}
