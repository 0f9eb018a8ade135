//! The guide's code listings, compiled and run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/complexes.md")]
mod complexes {}
#[doc = include_str!("../../../book/src/hodge.md")]
mod hodge {}
#[doc = include_str!("../../../book/src/morse.md")]
mod morse {}
#[doc = include_str!("../../../book/src/reconstruction.md")]
mod reconstruction {}
#[doc = include_str!("../../../book/src/morsification.md")]
mod morsification {}
#[doc = include_str!("../../../book/src/optimization.md")]
mod optimization {}
#[doc = include_str!("../../../book/src/experiments.md")]
mod experiments {}
