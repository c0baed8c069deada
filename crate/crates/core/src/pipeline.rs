//! End-to-end fits: Kendall FPCA and the covariance-smoothing baseline.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Grid};
use crate::eigen::{eigendecompose, EigenSystem};
use crate::error::Result;
use crate::kendall::{raw_covariance_baseline, raw_kendall, RawKendallResult};
use crate::kernel::Kernel;
use crate::scores::{FitDiagnostics, FittedModel};
use crate::smoothing::{
    default_candidates, default_h_prime, gcv_select_bandwidth_with, gcv_select_mean_bandwidth_with, Bandwidths,
    GcvCount, GcvSelection, MeanFit, RawSurfacePoint, SurfaceFit,
};

/// Default number of surface grid points.
pub const DEFAULT_GRID_SIZE: usize = 51;

/// Knobs shared by both fitting routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub grid_size: usize,
    pub kernel: Kernel,
    /// Donor bandwidth; `None` uses [`default_h_prime`].
    pub h_prime: Option<f64>,
    /// Surface bandwidth candidates; `None` uses [`default_candidates`].
    pub surface_candidates: Option<Vec<f64>>,
    /// Mean bandwidth candidates; `None` uses [`default_candidates`].
    pub mean_candidates: Option<Vec<f64>>,
    pub n_components: usize,
    /// Sample size used by both GCV searches.
    pub gcv_count: GcvCount,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            kernel: Kernel::Epanechnikov,
            h_prime: None,
            surface_candidates: None,
            mean_candidates: None,
            n_components: 2,
            gcv_count: GcvCount::Subjects,
        }
    }
}

impl FitOptions {
    fn grid(&self, dataset: &Dataset) -> Result<Grid> {
        Grid::new(dataset.domain(), self.grid_size)
    }

    fn surface_candidates(&self, dataset: &Dataset) -> Vec<f64> {
        self.surface_candidates
            .clone()
            .unwrap_or_else(|| default_candidates(dataset.domain()))
    }
}

/// Which covariance-like surface drives the eigenanalysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Kfpca,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfpcaFit {
    pub h_prime: f64,
    pub raw: RawKendallResult,
    pub selection: GcvSelection<SurfaceFit>,
    pub eigen: EigenSystem,
}

/// Raw Kendall covariances, GCV-smoothed surface and its eigenanalysis.
pub fn fit_kfpca(dataset: &Dataset, opts: &FitOptions) -> Result<KfpcaFit> {
    let grid = opts.grid(dataset)?;
    let h_prime = opts.h_prime.unwrap_or_else(|| default_h_prime(dataset));
    let raw = raw_kendall(dataset, h_prime, opts.kernel)?;
    let selection = gcv_select_bandwidth_with(
        &raw.points,
        &grid,
        &opts.surface_candidates(dataset),
        opts.kernel,
        opts.gcv_count,
    )?;
    let eigen = eigendecompose(&selection.fit.surface, opts.n_components)?;
    Ok(KfpcaFit {
        h_prime,
        raw,
        selection,
        eigen,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub mean: GcvSelection<MeanFit>,
    pub raw_points: Vec<RawSurfacePoint>,
    pub selection: GcvSelection<SurfaceFit>,
    pub eigen: EigenSystem,
}

/// GCV-smoothed mean curve.
pub fn fit_mean(dataset: &Dataset, opts: &FitOptions) -> Result<GcvSelection<MeanFit>> {
    let grid = opts.grid(dataset)?;
    let candidates = opts
        .mean_candidates
        .clone()
        .unwrap_or_else(|| default_candidates(dataset.domain()));
    gcv_select_mean_bandwidth_with(dataset, &grid, &candidates, opts.kernel, opts.gcv_count)
}

/// Mean, raw covariances, GCV-smoothed covariance surface and its
/// eigenanalysis.
pub fn fit_baseline(dataset: &Dataset, opts: &FitOptions) -> Result<BaselineFit> {
    let grid = opts.grid(dataset)?;
    let mean = fit_mean(dataset, opts)?;
    let raw_points = raw_covariance_baseline(dataset, &mean.fit.curve)?;
    let selection = gcv_select_bandwidth_with(
        &raw_points,
        &grid,
        &opts.surface_candidates(dataset),
        opts.kernel,
        opts.gcv_count,
    )?;
    let eigen = eigendecompose(&selection.fit.surface, opts.n_components)?;
    Ok(BaselineFit {
        mean,
        raw_points,
        selection,
        eigen,
    })
}

/// Prediction model from a Kendall fit and a separately smoothed mean.
pub fn kfpca_model(mean: &GcvSelection<MeanFit>, fit: &KfpcaFit, truncation: usize) -> Result<FittedModel> {
    let diagnostics = FitDiagnostics {
        dropped_comparisons: fit.raw.dropped_comparisons,
        retained_comparisons: fit.raw.retained_comparisons,
        retained_fraction: fit.raw.retained_fraction,
        n_raw_points: fit.raw.points.len(),
        surface_gcv: fit.selection.trace.clone(),
        mean_gcv: mean.trace.clone(),
        surface_local_constant_nodes: fit.selection.fit.local_constant_nodes.len(),
        mean_local_constant_nodes: mean.fit.local_constant_nodes.len(),
    };
    let bandwidths = Bandwidths {
        h_prime: Some(fit.h_prime),
        h: fit.selection.bandwidth,
        h_mu: mean.bandwidth,
    };
    FittedModel::new(
        mean.fit.curve.clone(),
        fit.eigen.clone(),
        truncation,
        bandwidths,
        diagnostics,
    )
}

/// Prediction model from a covariance-smoothing fit.
pub fn baseline_model(fit: &BaselineFit, truncation: usize) -> Result<FittedModel> {
    let diagnostics = FitDiagnostics {
        n_raw_points: fit.raw_points.len(),
        retained_fraction: 1.0,
        surface_gcv: fit.selection.trace.clone(),
        mean_gcv: fit.mean.trace.clone(),
        surface_local_constant_nodes: fit.selection.fit.local_constant_nodes.len(),
        mean_local_constant_nodes: fit.mean.fit.local_constant_nodes.len(),
        ..Default::default()
    };
    let bandwidths = Bandwidths {
        h_prime: None,
        h: fit.selection.bandwidth,
        h_mu: fit.mean.bandwidth,
    };
    FittedModel::new(
        fit.mean.fit.curve.clone(),
        fit.eigen.clone(),
        truncation,
        bandwidths,
        diagnostics,
    )
}

/// Fits a prediction model with `truncation` components.
pub fn fit_model(dataset: &Dataset, opts: &FitOptions, method: Method, truncation: usize) -> Result<FittedModel> {
    let mut opts = opts.clone();
    opts.n_components = opts.n_components.max(truncation);
    match method {
        Method::Kfpca => {
            let mean = fit_mean(dataset, &opts)?;
            let fit = fit_kfpca(dataset, &opts)?;
            kfpca_model(&mean, &fit, truncation)
        }
        Method::Baseline => baseline_model(&fit_baseline(dataset, &opts)?, truncation),
    }
}
