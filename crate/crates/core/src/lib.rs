//! Compression and reconstruction of signals on based chain complexes with
//! algebraic discrete Morse theory.

#[cfg(doctest)]
mod book;
pub mod complex;
pub mod error;
pub mod harness;
pub mod hodge;
pub mod linalg;
pub mod morse;
pub mod morsify;
pub mod optimize;

pub use complex::{
    BasedChainComplex, CellId, ComplexBuilder, InnerProduct, Signal, SparseMatrix,
    ValidationReport,
};
pub use error::{Error, Result};
pub use morse::{Matching, Retraction, SequentialMatching};
