//! Synthetic inputs and experiment orchestration.
//!
//! Complexes are triangulated grids on the unit square with deterministic
//! jitter; signals on edges are geometric (height, radial distance) or
//! sampled (uniform, normal).

mod experiment;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::complex::{BasedChainComplex, Signal};
use crate::error::{Error, Result};

pub use experiment::{
    project_report, project_signals, resolve_seeds, run_experiment, ExperimentReport, ExperimentSpec,
    Generator, ModeReport, ProjectionRow, ProjectionTable, TrialCurve, SEED_ENV,
};

/// Parameters of a jittered grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub jitter_seed: u64,
    /// Jitter amplitude as a fraction of `0.3 / max(rows, cols)`; 0 keeps
    /// the vertices on the lattice.
    #[serde(default = "one")]
    pub jitter: f64,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, jitter_seed: u64) -> Self {
        GridSpec {
            rows,
            cols,
            jitter_seed,
            jitter: 1.0,
        }
    }

    pub fn lattice(rows: usize, cols: usize) -> Self {
        GridSpec {
            jitter: 0.0,
            ..GridSpec::new(rows, cols, 0)
        }
    }
}

/// A complex with planar vertex coordinates.
#[derive(Debug, Clone)]
pub struct Grid {
    pub complex: BasedChainComplex,
    /// `coords[v] = [x, y]` for vertex index `v`.
    pub coords: Vec<[f64; 2]>,
}

/// Triangulate the unit square into `rows x cols` squares, each split along
/// the diagonal from `(i, j)` to `(i+1, j+1)`. Vertex `i * (cols + 1) + j`
/// sits near `(j / cols, i / rows)`.
pub fn generate_grid_complex(spec: &GridSpec) -> Result<Grid> {
    let (rows, cols) = (spec.rows, spec.cols);
    if rows == 0 || cols == 0 {
        return Err(Error::Config("grid needs at least one row and one column".into()));
    }
    if !(spec.jitter.is_finite() && spec.jitter >= 0.0) {
        return Err(Error::Config("jitter must be a non-negative number".into()));
    }
    let id = |i: usize, j: usize| i * (cols + 1) + j;
    let mut facets: Vec<[usize; 3]> = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            facets.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
            facets.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
        }
    }
    let refs: Vec<&[usize]> = facets.iter().map(|f| f.as_slice()).collect();
    let complex = BasedChainComplex::from_simplices(&refs);
    let amp = spec.jitter * 0.3 / rows.max(cols) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.jitter_seed);
    let mut coords = Vec::with_capacity((rows + 1) * (cols + 1));
    for i in 0..=rows {
        for j in 0..=cols {
            let mut p = [j as f64 / cols as f64, i as f64 / rows as f64];
            if amp > 0.0 {
                p[0] += rng.random_range(-amp..=amp);
                p[1] += rng.random_range(-amp..=amp);
            }
            coords.push(p);
        }
    }
    Ok(Grid { complex, coords })
}

/// How an edge signal is produced.
/// Serialized as the strings accepted by [`FromStr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    /// Independent samples from `[0, 1]`.
    Uniform,
    /// Independent samples from a normal distribution.
    Normal { mean: f64, sd: f64 },
    /// Mean `y` coordinate of the two endpoints.
    Height,
    /// Distance from the edge midpoint to `(0.5, 0.5)`.
    Radial,
}

impl SignalKind {
    pub fn normal() -> Self {
        SignalKind::Normal { mean: 0.5, sd: 0.1 }
    }

    pub fn all() -> [SignalKind; 4] {
        [
            SignalKind::Uniform,
            SignalKind::normal(),
            SignalKind::Height,
            SignalKind::Radial,
        ]
    }

    pub fn needs_coords(&self) -> bool {
        matches!(self, SignalKind::Height | SignalKind::Radial)
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::Uniform => write!(f, "uniform"),
            SignalKind::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
            SignalKind::Height => write!(f, "height"),
            SignalKind::Radial => write!(f, "radial"),
        }
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    /// `uniform`, `height`, `radial`, `normal` or `normal(mean,sd)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "uniform" => return Ok(SignalKind::Uniform),
            "height" => return Ok(SignalKind::Height),
            "radial" => return Ok(SignalKind::Radial),
            "normal" => return Ok(SignalKind::normal()),
            _ => {}
        }
        let args = s
            .strip_prefix("normal(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown signal kind {s:?}")))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let parse = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {x:?} in signal kind {s:?}")))
        };
        match parts.as_slice() {
            [m, d] => Ok(SignalKind::Normal {
                mean: parse(m)?,
                sd: parse(d)?,
            }),
            _ => Err(Error::Config(format!("normal takes two parameters in {s:?}"))),
        }
    }
}

impl Serialize for SignalKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignalKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A signal on the 1-cells. Geometric kinds need `coords` (indexed like the
/// 0-cells); sampled kinds use `seed`.
pub fn generate_signal(
    complex: &BasedChainComplex,
    coords: Option<&[[f64; 2]]>,
    kind: SignalKind,
    seed: u64,
) -> Result<Signal> {
    if complex.max_degree() < 1 {
        return Err(Error::DegreeOutOfRange {
            degree: 1,
            min: 0,
            max: complex.max_degree(),
        });
    }
    let m = complex.dim(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = match kind {
        SignalKind::Uniform => (0..m).map(|_| rng.random_range(0.0..=1.0)).collect(),
        SignalKind::Normal { mean, sd } => {
            let dist = Normal::new(mean, sd)
                .map_err(|e| Error::Config(format!("invalid normal distribution: {e}")))?;
            (0..m).map(|_| dist.sample(&mut rng)).collect()
        }
        SignalKind::Height | SignalKind::Radial => {
            let coords = coords
                .ok_or_else(|| Error::Config(format!("signal kind {kind} needs vertex coordinates")))?;
            if coords.len() != complex.dim(0) {
                return Err(Error::Config(format!(
                    "{} coordinates for {} vertices",
                    coords.len(),
                    complex.dim(0)
                )));
            }
            let b = complex.boundary(1);
            (0..m)
                .map(|e| {
                    let ends = b.col(e);
                    if ends.len() != 2 {
                        return Err(Error::Config(format!(
                            "edge {} does not have two endpoints",
                            complex.cell_names(1)[e]
                        )));
                    }
                    let (p, q) = (coords[ends[0].0], coords[ends[1].0]);
                    let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
                    Ok(match kind {
                        SignalKind::Height => mid[1],
                        _ => ((mid[0] - 0.5).powi(2) + (mid[1] - 0.5).powi(2)).sqrt(),
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(Signal::new(1, values))
}
