//! JSON file formats for complexes and signals.
//!
//! ```text
//! { "max_degree": k,
//!   "cells":    { "n": [name, ...] },
//!   "boundary": { "n": [[row_name, col_name, coeff], ...] },
//!   "weights":  { "n": [[...], ...] | {"diag": [...]} } }      // optional
//! ```
//!
//! Degrees without a `weights` entry get the identity. Saving writes degrees
//! in numeric order, boundary triples in column-major order and omits
//! identity weights, so `save(load(f))` is stable byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BasedChainComplex, InnerProduct, Signal, SparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexFile {
    pub max_degree: usize,
    pub cells: BTreeMap<usize, Vec<String>>,
    #[serde(default)]
    pub boundary: BTreeMap<usize, Vec<(String, String, f64)>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<usize, WeightsFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsFile {
    Diag { diag: Vec<f64> },
    Matrix(Vec<Vec<f64>>),
}

impl ComplexFile {
    pub fn from_complex(c: &BasedChainComplex) -> Self {
        let cells = (0..=c.max_degree())
            .map(|n| (n, c.cell_names(n).to_vec()))
            .collect();
        let boundary = (1..=c.max_degree())
            .map(|n| {
                let triples = c
                    .boundary(n)
                    .triplets()
                    .map(|(r, col, v)| {
                        (
                            c.cell_names(n - 1)[r].clone(),
                            c.cell_names(n)[col].clone(),
                            v,
                        )
                    })
                    .collect();
                (n, triples)
            })
            .collect();
        let weights = c
            .inner_products()
            .iter()
            .enumerate()
            .filter(|(_, ip)| !ip.is_identity())
            .map(|(n, ip)| {
                let w = match ip {
                    InnerProduct::Diagonal(d) => WeightsFile::Diag { diag: d.clone() },
                    InnerProduct::Dense(m) => WeightsFile::Matrix(
                        (0..m.nrows())
                            .map(|i| m.row(i).iter().copied().collect())
                            .collect(),
                    ),
                };
                (n, w)
            })
            .collect();
        ComplexFile {
            max_degree: c.max_degree(),
            cells,
            boundary,
            weights,
        }
    }

    pub fn into_complex(self) -> Result<BasedChainComplex> {
        let top = self.max_degree + 1;
        for &n in self
            .cells
            .keys()
            .chain(self.boundary.keys())
            .chain(self.weights.keys())
        {
            if n >= top {
                return Err(Error::parse(
                    format!("degree {n}"),
                    format!("exceeds max_degree {}", self.max_degree),
                ));
            }
        }
        let names: Vec<Vec<String>> = (0..top)
            .map(|n| self.cells.get(&n).cloned().unwrap_or_default())
            .collect();
        let index: Vec<HashMap<&str, usize>> = names
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), i))
                    .collect()
            })
            .collect();
        let mut boundaries = Vec::with_capacity(top.saturating_sub(1));
        for n in 1..top {
            let mut triples = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for (k, (row, col, v)) in self
                .boundary
                .get(&n)
                .map(Vec::as_slice)
                .unwrap_or_default()
                .iter()
                .enumerate()
            {
                let loc = || format!("boundary.{n}[{k}]");
                let r = *index[n - 1].get(row.as_str()).ok_or_else(|| {
                    Error::parse(loc(), format!("unknown cell {row:?} in degree {}", n - 1))
                })?;
                let c = *index[n].get(col.as_str()).ok_or_else(|| {
                    Error::parse(loc(), format!("unknown cell {col:?} in degree {n}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(loc(), "coefficient is not finite"));
                }
                if !seen.insert((r, c)) {
                    return Err(Error::parse(
                        loc(),
                        format!("duplicate entry for ({row}, {col})"),
                    ));
                }
                triples.push((r, c, *v));
            }
            boundaries.push(SparseMatrix::from_triplets(
                names[n - 1].len(),
                names[n].len(),
                &triples,
            ));
        }
        let weights = (0..top)
            .map(|n| {
                let dim = names[n].len();
                match self.weights.get(&n) {
                    None => Ok(InnerProduct::identity(dim)),
                    Some(WeightsFile::Diag { diag }) => {
                        if diag.len() != dim {
                            return Err(Error::parse(
                                format!("weights.{n}.diag"),
                                format!("expected {dim} entries, got {}", diag.len()),
                            ));
                        }
                        Ok(InnerProduct::Diagonal(diag.clone()))
                    }
                    Some(WeightsFile::Matrix(rows)) => {
                        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                            return Err(Error::parse(
                                format!("weights.{n}"),
                                format!("expected a {dim}x{dim} matrix"),
                            ));
                        }
                        let m = Mat::from_fn(dim, dim, |i, j| rows[i][j]);
                        Ok(InnerProduct::Dense(m))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        BasedChainComplex::new(names, boundaries, Some(weights))
            .map_err(|e| Error::parse("cells", e.to_string()))
    }
}

impl BasedChainComplex {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ComplexFile::from_complex(self))
            .expect("complex serializes");
        s.push('\n');
        s
    }

    /// Parse without running [`validate`](Self::validate).
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ComplexFile = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        file.into_complex()
    }
}

/// Load a complex and reject it unless it validates.
pub fn load(path: impl AsRef<Path>) -> Result<BasedChainComplex> {
    let c = load_unchecked(path)?;
    let report = c.validate();
    if !report.ok {
        return Err(Error::InvalidComplex(report));
    }
    Ok(c)
}

pub fn load_unchecked(path: impl AsRef<Path>) -> Result<BasedChainComplex> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BasedChainComplex::from_json_str(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn save(complex: &BasedChainComplex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, complex.to_json_string()).map_err(|e| Error::io(path, e))
}

/// `{ "degree": n, "values": { cell_name: real } }`. Cells missing from
/// `values` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFile {
    pub degree: usize,
    pub values: BTreeMap<String, f64>,
}

impl SignalFile {
    pub fn from_signal(complex: &BasedChainComplex, s: &Signal) -> Result<Self> {
        complex.check_signal(s)?;
        let values = complex
            .cell_names(s.degree)
            .iter()
            .zip(s.values.iter())
            .map(|(n, &v)| (n.clone(), v))
            .collect();
        Ok(SignalFile {
            degree: s.degree,
            values,
        })
    }

    pub fn to_signal(&self, complex: &BasedChainComplex) -> Result<Signal> {
        if self.degree > complex.max_degree() {
            return Err(Error::DegreeOutOfRange {
                degree: self.degree,
                min: 0,
                max: complex.max_degree(),
            });
        }
        let mut s = Signal::zeros(self.degree, complex.dim(self.degree));
        for (name, &v) in &self.values {
            let id = complex
                .cell(name)
                .map_err(|_| Error::parse(format!("values.{name}"), "unknown cell"))?;
            if id.degree != self.degree {
                return Err(Error::parse(
                    format!("values.{name}"),
                    format!("cell has degree {}, signal has degree {}", id.degree, self.degree),
                ));
            }
            s.values[id.index] = v;
        }
        Ok(s)
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            format!("{}: line {}, column {}", path.display(), e.line(), e.column()),
            e.to_string(),
        )
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

impl Signal {
    pub fn load(complex: &BasedChainComplex, path: impl AsRef<Path>) -> Result<Signal> {
        read_json::<SignalFile>(path.as_ref())?.to_signal(complex)
    }

    pub fn save(&self, complex: &BasedChainComplex, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), &SignalFile::from_signal(complex, self)?)
    }
}
