//! Discretized eigenequations of a smoothed surface and eigenfunction
//! comparison metrics.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Curve, Grid};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::smoothing::SurfaceEstimate;

/// Leading eigenpairs of a surface operator, eigenfunctions orthonormal
/// under trapezoid quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Curve>,
    /// Set when a returned eigenvalue is numerically zero relative to the
    /// spectrum.
    #[serde(default)]
    pub rank_deficient: bool,
}

impl EigenSystem {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Solves `int V(s,t) phi(t) dt = rho phi(s)` on the surface grid.
///
/// The operator is discretized as `W^{1/2} V W^{1/2}` with trapezoid weights
/// `W`, which keeps the matrix symmetric; eigenvectors `u` map back to
/// `phi = W^{-1/2} u`. Each eigenfunction is oriented so that its integral is
/// nonnegative, with `phi(lower) >= 0` breaking near-zero ties.
pub fn eigendecompose(surface: &SurfaceEstimate, n_components: usize) -> Result<EigenSystem> {
    let grid = surface.grid();
    let g = grid.len();
    if n_components == 0 || n_components > g {
        return Err(Error::InvalidParameter(alloc::format!(
            "n_components = {n_components} must lie in [1, {g}]"
        )));
    }
    let v = surface.values();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("surface".into()));
    }
    let mut asym = 0.0f64;
    for a in 0..g {
        for b in (a + 1)..g {
            asym = asym.max((v[a * g + b] - v[b * g + a]).abs());
        }
    }
    if asym > 1e-9 {
        return Err(Error::NotSymmetric(asym));
    }

    let w = grid.trapezoid_weights();
    let sw: Vec<f64> = w.iter().map(|x| libm::sqrt(*x)).collect();
    let mut m = Vec::with_capacity(g * g);
    for a in 0..g {
        for b in 0..g {
            m.push(sw[a] * v[a * g + b] * sw[b]);
        }
    }
    let eig = symmetric_eigen(&m, g);

    let scale = eig.values.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut eigenfunctions = Vec::with_capacity(n_components);
    let mut rank_deficient = scale == 0.0;
    for k in 0..n_components {
        if eig.values[k].abs() <= 1e-12 * scale {
            rank_deficient = true;
        }
        let mut phi: Vec<f64> = eig.vectors[k].iter().zip(&sw).map(|(u, s)| u / s).collect();
        let norm = libm::sqrt(phi.iter().zip(&w).map(|(p, wg)| wg * p * p).sum::<f64>());
        phi.iter_mut().for_each(|p| *p /= norm);
        let integral: f64 = phi.iter().zip(&w).map(|(p, wg)| wg * p).sum();
        let flip = if integral.abs() <= 1e-9 {
            phi[0] < 0.0
        } else {
            integral < 0.0
        };
        if flip {
            phi.iter_mut().for_each(|p| *p = -*p);
        }
        eigenfunctions.push(Curve::new(grid.clone(), phi)?);
    }
    Ok(EigenSystem {
        grid: grid.clone(),
        eigenvalues: eig.values[..n_components].to_vec(),
        eigenfunctions,
        rank_deficient,
    })
}

/// Integrated squared error after aligning the sign of `estimate` with
/// `truth`.
pub fn imse(truth: &Curve, estimate: &Curve) -> Result<f64> {
    let sign = if truth.inner(estimate)? < 0.0 { -1.0 } else { 1.0 };
    let w = truth.grid().trapezoid_weights();
    Ok(truth
        .values()
        .iter()
        .zip(estimate.values())
        .zip(&w)
        .map(|((a, b), wg)| {
            let d = a - sign * b;
            wg * d * d
        })
        .sum())
}

/// Angle in degrees between the directions of two normalized curves,
/// `arccos |<truth, estimate>|`.
///
/// Evaluated as `2 asin(d / 2)` with `d` the sign-aligned distance, which
/// agrees with the arccos form for unit vectors and stays accurate near 0.
pub fn angle(truth: &Curve, estimate: &Curve) -> Result<f64> {
    let d = libm::sqrt(imse(truth, estimate)?);
    Ok((2.0 * libm::asin((0.5 * d).min(1.0))).to_degrees().min(90.0))
}
