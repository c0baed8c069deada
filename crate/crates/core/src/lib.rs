//! Kendall's tau function principal component analysis for sparse and
//! irregularly observed curves.
//!
//! The crate is `no_std` (with `alloc`). File formats, parallel benchmarks
//! and the command-line interface live in the `kfpca` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod eigen;
pub mod error;
pub mod kendall;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod scores;
pub mod simulation;
pub mod smoothing;

pub use data::{Curve, Dataset, Domain, Grid, SparseSample};
pub use eigen::{angle, eigendecompose, imse, EigenSystem};
pub use error::{Error, Result};
pub use kendall::{raw_covariance_baseline, raw_kendall, RawKendallResult};
pub use kernel::Kernel;
pub use pipeline::{
    baseline_model, fit_baseline, fit_kfpca, fit_mean, fit_model, kfpca_model, BaselineFit, FitOptions, KfpcaFit,
    Method,
};
pub use scores::{estimate_scores, predict_trajectory, prediction_mse, train_test_split, FittedModel, ScoreEstimate};
pub use smoothing::{Bandwidths, GcvCount, RawSurfacePoint, SurfaceEstimate};
