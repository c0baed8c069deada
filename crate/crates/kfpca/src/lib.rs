//! File formats, parallel benchmarks and the command-line interface for
//! Kendall FPCA. The estimators themselves live in `kfpca-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;

pub use error::{Error, Result};
