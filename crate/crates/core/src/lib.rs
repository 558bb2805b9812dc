//! Magnetogram patch preprocessing and flare forecast verification.
//!
//! The crate turns active-region magnetogram patches into fixed-size 8-bit
//! images (`raster`, `window`), expands and balances a training set
//! (`augment`, `dataset`), and scores externally produced predictions with
//! TSS, HSS and their geometric mean CSS (`evaluate`). File formats and the
//! batch driver behind the `flarebench` binary live in `io` and `batch`.
//!
//! Data-parallel loops go through [`exec::Exec`]. With the default
//! `parallel` feature they run on rayon; without it every entry point falls
//! back to the sequential path and produces identical output.

pub mod augment;
pub mod batch;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod io;
pub mod raster;
mod seed;
pub mod window;

pub use error::{Error, Result};
pub use exec::Exec;
