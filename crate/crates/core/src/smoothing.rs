//! Kernel smoothers: the Nadaraya-Watson donor-curve estimate, local-linear
//! mean smoothing, the bivariate local-linear surface smoother, and GCV
//! bandwidth selection.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Curve, Dataset, Domain, Grid, SparseSample};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Smoothing bandwidths of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    /// Donor pre-smoothing bandwidth; absent for the covariance baseline.
    pub h_prime: Option<f64>,
    /// Surface smoothing bandwidth.
    pub h: f64,
    /// Mean smoothing bandwidth.
    pub h_mu: f64,
}

impl Bandwidths {
    pub fn validate(&self, domain: Domain) -> Result<()> {
        let h_prime = self.h_prime.map(|v| ("h_prime", v));
        for (name, v) in [("h", self.h), ("h_mu", self.h_mu)].into_iter().chain(h_prime) {
            if !(v > 0.0 && v <= domain.length()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must lie in (0, {}]",
                    domain.length()
                )));
            }
        }
        Ok(())
    }
}

/// An off-diagonal raw surface observation at `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSurfacePoint {
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub subject_index: usize,
}

/// A symmetric surface on a square grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEstimate {
    grid: Grid,
    values: Vec<f64>,
}

impl SurfaceEstimate {
    /// Wraps a row-major `G x G` matrix, checking shape, finiteness and
    /// symmetry to `1e-9` relative to the largest entry.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let g = grid.len();
        if values.len() != g * g {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surface".into()));
        }
        let asym = max_asymmetry(&values, g);
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if asym > 1e-9 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { grid, values })
    }

    /// Builds `(V + V^T) / 2` from an arbitrary square matrix.
    pub fn symmetrized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        let g = grid.len();
        if values.len() != g * g {
            return Err(Error::GridMismatch);
        }
        for a in 0..g {
            for b in (a + 1)..g {
                let m = 0.5 * (values[a * g + b] + values[b * g + a]);
                values[a * g + b] = m;
                values[b * g + a] = m;
            }
        }
        Self::new(grid, values)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid
            .points()
            .iter()
            .flat_map(|&s| grid.points().iter().map(move |&t| (s, t)))
            .map(|(s, t)| f(s, t))
            .collect();
        Self::symmetrized(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.grid.len() + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let g = self.grid.len();
        &self.values[a * g..(a + 1) * g]
    }

    /// Bilinear interpolation at `(s, t)`.
    pub fn eval(&self, s: f64, t: f64) -> Option<f64> {
        self.grid.interpolate_2d(&self.values, s, t)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

fn max_asymmetry(values: &[f64], g: usize) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..g {
        for b in (a + 1)..g {
            worst = worst.max((values[a * g + b] - values[b * g + a]).abs());
        }
    }
    worst
}

/// Nadaraya-Watson estimate of the donor curve at `target`.
///
/// Returns `None` when no donor observation falls strictly inside the kernel
/// window, i.e. the weights sum to zero.
pub fn nw_estimate(donor: &SparseSample, target: f64, h_prime: f64, kernel: Kernel) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &y) in donor.times().iter().zip(donor.values()) {
        let w = kernel.scaled(target - t, h_prime);
        num += w * y;
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// Default donor bandwidth `|T| / median(m_i)`, clamped to
/// `[0.02 |T|, 0.25 |T|]`.
pub fn default_h_prime(dataset: &Dataset) -> f64 {
    let mut counts: Vec<usize> = dataset.samples().iter().map(SparseSample::len).collect();
    counts.sort_unstable();
    let n = counts.len();
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        0.5 * (counts[n / 2 - 1] + counts[n / 2]) as f64
    };
    let len = dataset.domain().length();
    (len / median).clamp(0.02 * len, 0.25 * len)
}

/// `count` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_candidates(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = libm::pow(hi / lo, 1.0 / (count - 1) as f64);
            let mut out: Vec<f64> = (0..count).map(|i| lo * libm::pow(ratio, i as f64)).collect();
            out[count - 1] = hi;
            out
        }
    }
}

/// Default bandwidth candidates: eight geometric steps from `0.05 |T|` to
/// `0.3 |T|`.
pub fn default_candidates(domain: Domain) -> Vec<f64> {
    let len = domain.length();
    geometric_candidates(0.05 * len, 0.3 * len, 8)
}

/// Kernel weights of the grid nodes within `h` of `x`: `(node, u, weight)`
/// with `u = (x - node) / h`.
fn node_weights(grid: &Grid, x: f64, h: f64, kernel: Kernel, out: &mut Vec<(usize, f64, f64)>) {
    out.clear();
    let g = grid.len() as isize;
    let lo = libm::ceil((x - h - grid.lower()) / grid.spacing()) as isize;
    let hi = libm::floor((x + h - grid.lower()) / grid.spacing()) as isize;
    for a in lo.max(0)..=hi.min(g - 1) {
        let node = grid.points()[a as usize];
        let w = kernel.scaled(x - node, h);
        if w > 0.0 {
            out.push((a as usize, (x - node) / h, w));
        }
    }
}

/// Local-linear mean estimate on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFit {
    pub curve: Curve,
    pub bandwidth: f64,
    /// Nodes where the local design was degenerate and a weighted mean was used.
    pub local_constant_nodes: Vec<usize>,
}

/// Local designs whose weighted moment determinant, relative to the
/// matching power of the total weight, falls below this value are treated as
/// degenerate and fitted by a local constant. Well-spread windows sit near
/// `1e-2` (about `3e-3` in a one-sided corner window); nearly collinear
/// windows fall to `1e-5` and below, where the local plane extrapolates
/// wildly.
pub const DESIGN_TOLERANCE: f64 = 1e-4;

/// Local-linear smoother of the pooled observations.
pub fn local_linear_mean(dataset: &Dataset, grid: &Grid, h_mu: f64, kernel: Kernel) -> Result<MeanFit> {
    if !(h_mu > 0.0 && h_mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mean bandwidth {h_mu} must be positive"
        )));
    }
    if dataset.n_observations() < 2 {
        return Err(Error::InvalidParameter("need at least 2 pooled observations".into()));
    }
    let g = grid.len();
    // s0, s1, s2, y0, y1
    let mut acc = vec![[0.0f64; 5]; g];
    let mut buf = Vec::new();
    for sample in dataset.samples() {
        for (&t, &y) in sample.times().iter().zip(sample.values()) {
            node_weights(grid, t, h_mu, kernel, &mut buf);
            for &(a, u, w) in &buf {
                let e = &mut acc[a];
                e[0] += w;
                e[1] += w * u;
                e[2] += w * u * u;
                e[3] += w * y;
                e[4] += w * u * y;
            }
        }
    }
    let mut values = Vec::with_capacity(g);
    let mut local_constant_nodes = Vec::new();
    for (a, e) in acc.iter().enumerate() {
        let [s0, s1, s2, y0, y1] = *e;
        if !(s0 > 0.0) {
            return Err(Error::BandwidthTooSmall {
                bandwidth: h_mu,
                location: format!("mean grid point {}", grid.points()[a]),
            });
        }
        let det = s0 * s2 - s1 * s1;
        if det <= DESIGN_TOLERANCE * s0 * s0 {
            local_constant_nodes.push(a);
            values.push(y0 / s0);
        } else {
            values.push((s2 * y0 - s1 * y1) / det);
        }
    }
    Ok(MeanFit {
        curve: Curve::new(grid.clone(), values)?,
        bandwidth: h_mu,
        local_constant_nodes,
    })
}

/// Local-linear surface fit together with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFit {
    pub surface: SurfaceEstimate,
    pub bandwidth: f64,
    pub kernel: Kernel,
    /// Nodes `(a, b)` that fell back to the local-constant estimate.
    pub local_constant_nodes: Vec<(usize, usize)>,
}

/// Bivariate local-linear smoother of raw surface points.
///
/// At each node `(s, t)` the intercept of the weighted plane fit is obtained
/// in closed form from the moment sums
/// `S_pq = n^-1 sum u^p v^q k_h(t_k - s) k_h(t_l - t)` and the matching
/// response moments `K_pq`, with `u = (t_k - s)/h`, `v = (t_l - t)/h`.
/// The node matrix is then symmetrized.
pub fn local_linear_surface(points: &[RawSurfacePoint], grid: &Grid, h: f64, kernel: Kernel) -> Result<SurfaceFit> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no raw surface points".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "surface bandwidth {h} must be positive"
        )));
    }
    let g = grid.len();
    // s00, s10, s01, s20, s11, s02, k00, k10, k01
    let mut acc = vec![[0.0f64; 9]; g * g];
    let mut su = Vec::new();
    let mut tv = Vec::new();
    for p in points {
        node_weights(grid, p.s, h, kernel, &mut su);
        if su.is_empty() {
            continue;
        }
        node_weights(grid, p.t, h, kernel, &mut tv);
        for &(a, u, wa) in &su {
            let row = &mut acc[a * g..(a + 1) * g];
            for &(b, v, wb) in &tv {
                let w = wa * wb;
                let wy = w * p.value;
                let e = &mut row[b];
                e[0] += w;
                e[1] += w * u;
                e[2] += w * v;
                e[3] += w * u * u;
                e[4] += w * u * v;
                e[5] += w * v * v;
                e[6] += wy;
                e[7] += wy * u;
                e[8] += wy * v;
            }
        }
    }

    let inv_n = 1.0 / points.len() as f64;
    let mut values = Vec::with_capacity(g * g);
    let mut local_constant_nodes = Vec::new();
    for (idx, e) in acc.iter().enumerate() {
        let [s00, s10, s01, s20, s11, s02, k00, k10, k01] = e.map(|x| x * inv_n);
        if !(s00 > 0.0) {
            let (a, b) = (idx / g, idx % g);
            return Err(Error::BandwidthTooSmall {
                bandwidth: h,
                location: format!("surface node ({}, {})", grid.points()[a], grid.points()[b]),
            });
        }
        let a1 = s20 * s02 - s11 * s11;
        let a2 = s10 * s02 - s01 * s11;
        let a3 = s01 * s20 - s10 * s11;
        let det = a1 * s00 - a2 * s10 - a3 * s01;
        if det.abs() <= DESIGN_TOLERANCE * s00 * s00 * s00 {
            local_constant_nodes.push((idx / g, idx % g));
            values.push(k00 / s00);
        } else {
            values.push((a1 * k00 - a2 * k10 - a3 * k01) / det);
        }
    }
    Ok(SurfaceFit {
        surface: SurfaceEstimate::symmetrized(grid.clone(), values)?,
        bandwidth: h,
        kernel,
        local_constant_nodes,
    })
}

/// One GCV evaluation. Non-finite `rss` and `score` serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvEntry {
    pub bandwidth: f64,
    /// NaN for infeasible candidates.
    #[serde(with = "null_as_nan")]
    pub rss: f64,
    /// Effective degrees of freedom.
    pub dof: f64,
    /// `rss / (1 - dof/n)^2`; infinite for infeasible candidates.
    #[serde(with = "null_as_infinity")]
    pub score: f64,
    pub note: Option<String>,
}

pub(crate) fn serialize_finite<S: serde::Serializer>(x: &f64, s: S) -> core::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_some(x)
    } else {
        s.serialize_none()
    }
}

mod null_as_nan {
    pub(super) use super::serialize_finite as serialize;

    pub(super) fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(<Option<f64> as serde::Deserialize>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod null_as_infinity {
    pub(super) use super::serialize_finite as serialize;

    pub(super) fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(<Option<f64> as serde::Deserialize>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Result of a GCV bandwidth search: the winning fit plus the full trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvSelection<F> {
    pub bandwidth: f64,
    pub fit: F,
    pub trace: Vec<GcvEntry>,
}

/// Sample size `n` entering the GCV denominator `(1 - dof/n)^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcvCount {
    /// Number of distinct subjects contributing residuals. Points from one
    /// subject share its curve and noise, so subjects are the independent
    /// units.
    #[default]
    Subjects,
    /// Number of residuals, treating every point as independent.
    Points,
}

impl GcvCount {
    fn resolve(self, n_points: usize, subjects: impl Iterator<Item = usize>) -> usize {
        match self {
            GcvCount::Points => n_points,
            GcvCount::Subjects => {
                let mut ids: Vec<usize> = subjects.collect();
                ids.sort_unstable();
                ids.dedup();
                ids.len()
            }
        }
    }
}

fn validate_candidates(candidates: &[f64]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no bandwidth candidates".into()));
    }
    if let Some(h) = candidates.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth candidate {h} must be positive"
        )));
    }
    Ok(())
}

/// Runs `fit_and_rss` for each candidate and returns the GCV minimizer.
/// Ties in score go to the smaller degrees-of-freedom penalty.
fn gcv_search<F>(
    candidates: &[f64],
    n: usize,
    dof_of: impl Fn(f64) -> f64,
    tss: f64,
    mut fit_and_rss: impl FnMut(f64) -> Result<(F, f64)>,
) -> Result<GcvSelection<F>> {
    validate_candidates(candidates)?;
    let n = n as f64;
    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, F)> = None;
    for &h in candidates {
        let dof = dof_of(h);
        let mut entry = GcvEntry {
            bandwidth: h,
            rss: f64::NAN,
            dof,
            score: f64::INFINITY,
            note: None,
        };
        if dof >= n {
            entry.note = Some(format!("degrees of freedom {dof:.3} >= n = {n}"));
            trace.push(entry);
            continue;
        }
        match fit_and_rss(h) {
            Ok((fit, mut rss)) => {
                // residuals at rounding level are exact zeros
                if rss <= 1e-20 * tss {
                    rss = 0.0;
                }
                let denom = 1.0 - dof / n;
                entry.rss = rss;
                entry.score = rss / (denom * denom);
                let idx = trace.len();
                trace.push(entry);
                let better = match &best {
                    None => true,
                    Some((bi, _)) => {
                        let b: &GcvEntry = &trace[*bi];
                        let e = &trace[idx];
                        e.score < b.score || (e.score == b.score && e.dof < b.dof)
                    }
                };
                if better {
                    best = Some((idx, fit));
                }
            }
            Err(err) if err.is_numerical() => {
                entry.note = Some(format!("{err}"));
                trace.push(entry);
            }
            Err(err) => return Err(err),
        }
    }
    match best {
        Some((idx, fit)) => Ok(GcvSelection {
            bandwidth: trace[idx].bandwidth,
            fit,
            trace,
        }),
        None => Err(Error::NoFeasibleBandwidth(
            trace
                .iter()
                .map(|e| format!("h = {}: {}", e.bandwidth, e.note.as_deref().unwrap_or("infeasible")))
                .collect(),
        )),
    }
}

/// GCV choice of the surface bandwidth, counting subjects as the sample
/// size. See [`gcv_select_bandwidth_with`].
pub fn gcv_select_bandwidth(
    points: &[RawSurfacePoint],
    grid: &Grid,
    candidates: &[f64],
    kernel: Kernel,
) -> Result<GcvSelection<SurfaceFit>> {
    gcv_select_bandwidth_with(points, grid, candidates, kernel, GcvCount::Subjects)
}

/// GCV choice of the surface bandwidth.
///
/// Fitted values at the raw locations come from bilinear interpolation of
/// the node surface; degrees of freedom use the trace surrogate
/// `|T|^2 k(0)^2 / h^2`.
pub fn gcv_select_bandwidth_with(
    points: &[RawSurfacePoint],
    grid: &Grid,
    candidates: &[f64],
    kernel: Kernel,
    count: GcvCount,
) -> Result<GcvSelection<SurfaceFit>> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no raw surface points".into()));
    }
    let len = grid.domain().length();
    let k0 = kernel.evaluate(0.0);
    let tss: f64 = points.iter().map(|p| p.value * p.value).sum();
    gcv_search(
        candidates,
        count.resolve(points.len(), points.iter().map(|p| p.subject_index)),
        |h| len * len * k0 * k0 / (h * h),
        tss,
        |h| {
            let fit = local_linear_surface(points, grid, h, kernel)?;
            let rss = points
                .iter()
                .map(|p| {
                    let r = p.value - fit.surface.eval(p.s, p.t).unwrap_or(f64::NAN);
                    r * r
                })
                .sum::<f64>();
            if !rss.is_finite() {
                return Err(Error::NonFinite("GCV residuals".into()));
            }
            Ok((fit, rss))
        },
    )
}

/// GCV choice of the mean bandwidth, counting subjects as the sample size.
pub fn gcv_select_mean_bandwidth(
    dataset: &Dataset,
    grid: &Grid,
    candidates: &[f64],
    kernel: Kernel,
) -> Result<GcvSelection<MeanFit>> {
    gcv_select_mean_bandwidth_with(dataset, grid, candidates, kernel, GcvCount::Subjects)
}

/// GCV choice of the mean bandwidth, with the one-dimensional surrogate
/// `|T| k(0) / h`.
pub fn gcv_select_mean_bandwidth_with(
    dataset: &Dataset,
    grid: &Grid,
    candidates: &[f64],
    kernel: Kernel,
    count: GcvCount,
) -> Result<GcvSelection<MeanFit>> {
    let len = grid.domain().length();
    let k0 = kernel.evaluate(0.0);
    let tss: f64 = dataset
        .samples()
        .iter()
        .flat_map(|s| s.values().iter())
        .map(|y| y * y)
        .sum();
    gcv_search(
        candidates,
        count.resolve(dataset.n_observations(), 0..dataset.n_subjects()),
        |h| len * k0 / h,
        tss,
        |h| {
            let fit = local_linear_mean(dataset, grid, h, kernel)?;
            let mut rss = 0.0;
            for s in dataset.samples() {
                for (&t, &y) in s.times().iter().zip(s.values()) {
                    let r = y - fit.curve.eval(t).unwrap_or(f64::NAN);
                    rss += r * r;
                }
            }
            if !rss.is_finite() {
                return Err(Error::NonFinite("GCV residuals".into()));
            }
            Ok((fit, rss))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn sample(id: &str, pts: &[(f64, f64)]) -> SparseSample {
        SparseSample::from_pairs(id, pts.to_vec()).unwrap()
    }

    #[test]
    fn nw_single_point_and_empty_window() {
        let d = sample("d", &[(2.0, 5.0)]);
        for h in [0.1, 1.0, 10.0] {
            assert_eq!(nw_estimate(&d, 2.0, h, Kernel::Epanechnikov), Some(5.0));
        }
        let d = sample("d", &[(0.0, 1.0), (1.0, 2.0)]);
        assert_eq!(nw_estimate(&d, 5.0, 0.5, Kernel::Epanechnikov), None);
    }

    #[test]
    fn nw_symmetric_weights_give_midpoint() {
        let d = sample("d", &[(0.0, 1.0), (0.2, 3.0)]);
        let v = nw_estimate(&d, 0.1, 0.5, Kernel::Epanechnikov).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn nw_ignores_observations_outside_window() {
        let full = sample("d", &[(0.0, 4.0), (0.3, 1.0), (0.6, 2.0), (3.0, 100.0)]);
        let near = sample("d", &[(0.3, 1.0), (0.6, 2.0)]);
        for k in [Kernel::Epanechnikov, Kernel::Quartic, Kernel::Triangular] {
            assert_eq!(nw_estimate(&full, 0.5, 0.4, k), nw_estimate(&near, 0.5, 0.4, k));
        }
    }

    #[test]
    fn default_h_prime_formula_and_clamps() {
        let make = |m: usize| {
            let samples = (0..4)
                .map(|i| {
                    let pts: Vec<(f64, f64)> = (0..m).map(|j| (10.0 * j as f64 / m as f64, 0.0)).collect();
                    sample(&i.to_string(), &pts)
                })
                .collect();
            Dataset::new(Domain::new(0.0, 10.0).unwrap(), samples).unwrap()
        };
        assert!((default_h_prime(&make(10)) - 1.0).abs() < 1e-15);
        assert!((default_h_prime(&make(2)) - 2.5).abs() < 1e-15);
        assert!((default_h_prime(&make(100)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn geometric_grid_endpoints() {
        let c = geometric_candidates(0.5, 3.0, 8);
        assert_eq!(c.len(), 8);
        assert_eq!(c[0], 0.5);
        assert_eq!(c[7], 3.0);
        let r = c[1] / c[0];
        for w in c.windows(2).take(6) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
    }

    fn plane_points(beta: [f64; 3]) -> Vec<RawSurfacePoint> {
        let mut pts = Vec::new();
        for i in 0..41 {
            for j in 0..41 {
                if i == j {
                    continue;
                }
                let s = (i as f64 * 0.25 + 0.01 * (j % 3) as f64).min(10.0);
                let t = j as f64 * 0.25;
                pts.push(RawSurfacePoint {
                    s,
                    t,
                    value: beta[0] + beta[1] * s + beta[2] * t,
                    subject_index: i,
                });
            }
        }
        pts
    }

    #[test]
    fn surface_reproduces_planes() {
        let grid = Grid::new(Domain::new(0.0, 10.0).unwrap(), 21).unwrap();
        let beta = [1.5, -0.3, 0.7];
        let pts = plane_points(beta);
        for h in [0.6, 1.0, 2.0] {
            let fit = local_linear_surface(&pts, &grid, h, Kernel::Epanechnikov).unwrap();
            for (a, &s) in grid.points().iter().enumerate() {
                for (b, &t) in grid.points().iter().enumerate() {
                    // symmetrization averages the plane with its transpose
                    let want = beta[0] + 0.5 * (beta[1] + beta[2]) * (s + t);
                    assert!((fit.surface.get(a, b) - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn surface_falls_back_then_errors() {
        let grid = Grid::new(Domain::new(0.0, 1.0).unwrap(), 3).unwrap();
        // one point: local linear impossible, local constant only where covered
        let pts = [RawSurfacePoint {
            s: 0.5,
            t: 0.5,
            value: 2.0,
            subject_index: 0,
        }];
        let fit = local_linear_surface(&pts, &grid, 2.0, Kernel::Epanechnikov).unwrap();
        assert_eq!(fit.local_constant_nodes.len(), 9);
        assert!(fit.surface.values().iter().all(|&v| (v - 2.0).abs() < 1e-15));
        let err = local_linear_surface(&pts, &grid, 0.3, Kernel::Epanechnikov).unwrap_err();
        assert!(matches!(err, Error::BandwidthTooSmall { .. }));
    }

    #[test]
    fn mean_reproduces_lines() {
        let samples: Vec<SparseSample> = (0..6)
            .map(|i| {
                let pts: Vec<(f64, f64)> = (0..8)
                    .map(|j| {
                        let t = (j as f64 * 1.3 + i as f64 * 0.37) % 10.0;
                        (t, 2.0 * t + 1.0)
                    })
                    .collect();
                sample(&i.to_string(), &pts)
            })
            .collect();
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), samples).unwrap();
        let grid = Grid::new(ds.domain(), 51).unwrap();
        let fit = local_linear_mean(&ds, &grid, 1.5, Kernel::Epanechnikov).unwrap();
        for (&s, &v) in grid.points().iter().zip(fit.curve.values()) {
            assert!((v - (2.0 * s + 1.0)).abs() < 1e-9);
        }
        assert!(local_linear_mean(&ds, &grid, 0.01, Kernel::Epanechnikov).is_err());
    }

    #[test]
    fn mean_degenerate_design_uses_weighted_mean() {
        let a = sample("a", &[(5.0, 1.0)]);
        let b = sample("b", &[(5.0, 3.0)]);
        let ds = Dataset::new(Domain::new(4.0, 6.0).unwrap(), vec![a, b]).unwrap();
        let grid = Grid::new(ds.domain(), 5).unwrap();
        let fit = local_linear_mean(&ds, &grid, 2.0, Kernel::Epanechnikov).unwrap();
        assert_eq!(fit.local_constant_nodes.len(), 5);
        assert!(fit.curve.values().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn gcv_singleton_and_zero_residual_tiebreak() {
        let grid = Grid::new(Domain::new(0.0, 10.0).unwrap(), 21).unwrap();
        let pts = plane_points([1.0, 0.5, 0.5]);
        let sel = gcv_select_bandwidth_with(&pts, &grid, &[1.0], Kernel::Epanechnikov, GcvCount::Points).unwrap();
        assert_eq!(sel.bandwidth, 1.0);
        let sel =
            gcv_select_bandwidth_with(&pts, &grid, &[1.0, 1.5, 2.0], Kernel::Epanechnikov, GcvCount::Points).unwrap();
        assert!(sel.trace.iter().all(|e| e.rss == 0.0), "{:?}", sel.trace);
        assert_eq!(sel.bandwidth, 2.0);
    }

    #[test]
    fn gcv_subject_count() {
        let grid = Grid::new(Domain::new(0.0, 10.0).unwrap(), 21).unwrap();
        // 41 subjects: dof 56.25 at h = 1 exceeds the subject count
        let pts = plane_points([1.0, 0.5, 0.5]);
        let sel = gcv_select_bandwidth(&pts, &grid, &[1.0, 2.0], Kernel::Epanechnikov).unwrap();
        assert!(sel.trace[0].score.is_infinite());
        assert!(sel.trace[0].note.is_some());
        assert_eq!(sel.bandwidth, 2.0);
        assert!(gcv_select_bandwidth(&pts, &grid, &[1.0], Kernel::Epanechnikov).is_err());
        assert_eq!(GcvCount::Subjects.resolve(5, [3, 1, 3, 3, 1].into_iter()), 2);
        assert_eq!(GcvCount::Points.resolve(5, [3, 1, 3, 3, 1].into_iter()), 5);
    }

    #[test]
    fn gcv_reports_all_infeasible() {
        let grid = Grid::new(Domain::new(0.0, 10.0).unwrap(), 11).unwrap();
        let pts = [RawSurfacePoint {
            s: 1.0,
            t: 2.0,
            value: 1.0,
            subject_index: 0,
        }];
        let err = gcv_select_bandwidth(&pts, &grid, &[0.5, 1.0], Kernel::Epanechnikov).unwrap_err();
        match err {
            Error::NoFeasibleBandwidth(list) => assert_eq!(list.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(gcv_select_bandwidth(&pts, &grid, &[], Kernel::Epanechnikov).is_err());
        assert!(gcv_select_bandwidth(&pts, &grid, &[-1.0], Kernel::Epanechnikov).is_err());
    }
}
