//! Raw Kendall's tau covariances and the baseline raw covariances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Curve, Dataset};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::smoothing::{nw_estimate, RawSurfacePoint};

/// Comparisons whose mean squared residual falls below this are dropped.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Raw Kendall's tau covariances with donor-drop accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawKendallResult {
    pub points: Vec<RawSurfacePoint>,
    pub dropped_comparisons: usize,
    pub retained_comparisons: usize,
    /// Retained comparisons over all `N (N - 1)` directed comparisons.
    pub retained_fraction: f64,
    /// Retained donors per subject (zero for subjects with one observation).
    pub retained_per_subject: Vec<usize>,
}

/// Raw Kendall's tau covariances.
///
/// For every subject `i` with at least two observations and every donor
/// `j != i`, the donor curve is pre-smoothed at `i`'s times. If any of those
/// values is undefined, or the mean squared residual `D_ij` is degenerate,
/// the comparison is dropped. Otherwise the residuals `r_q = Y_iq - X_j(t_iq)`
/// contribute `r_k r_l / D_ij` to every off-diagonal pair. Each subject's
/// raw values are averaged over its retained donors.
pub fn raw_kendall(dataset: &Dataset, h_prime: f64, kernel: Kernel) -> Result<RawKendallResult> {
    if !(h_prime > 0.0 && h_prime.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "donor bandwidth {h_prime} must be positive"
        )));
    }
    let samples = dataset.samples();
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSubjects(n));
    }

    let mut points = Vec::new();
    let mut dropped = 0usize;
    let mut retained_total = 0usize;
    let mut retained_per_subject = vec![0usize; n];
    let mut eligible = 0usize;

    let mut residuals = Vec::new();
    let mut acc = Vec::new();
    for (i, subject) in samples.iter().enumerate() {
        let m = subject.len();
        if m < 2 {
            continue;
        }
        eligible += 1;
        acc.clear();
        acc.resize(m * m, 0.0);
        let mut retained = 0usize;
        'donor: for (j, donor) in samples.iter().enumerate() {
            if j == i {
                continue;
            }
            residuals.clear();
            for (&t, &y) in subject.times().iter().zip(subject.values()) {
                match nw_estimate(donor, t, h_prime, kernel) {
                    Some(x) => residuals.push(y - x),
                    None => {
                        dropped += 1;
                        continue 'donor;
                    }
                }
            }
            let denom = residuals.iter().map(|r| r * r).sum::<f64>() / m as f64;
            if denom < DEGENERATE_DENOMINATOR {
                dropped += 1;
                continue;
            }
            retained += 1;
            for k in 0..m {
                let rk = residuals[k] / denom;
                for l in 0..m {
                    if k != l {
                        acc[k * m + l] += rk * residuals[l];
                    }
                }
            }
        }
        retained_per_subject[i] = retained;
        retained_total += retained;
        if retained == 0 {
            continue;
        }
        let scale = 1.0 / retained as f64;
        for k in 0..m {
            for l in 0..m {
                if k != l {
                    points.push(RawSurfacePoint {
                        s: subject.times()[k],
                        t: subject.times()[l],
                        value: acc[k * m + l] * scale,
                        subject_index: i,
                    });
                }
            }
        }
    }

    if eligible > 0 && retained_total == 0 {
        return Err(Error::BandwidthTooSmall {
            bandwidth: h_prime,
            location: "donor pre-smoothing (every comparison dropped)".into(),
        });
    }
    Ok(RawKendallResult {
        points,
        dropped_comparisons: dropped,
        retained_comparisons: retained_total,
        retained_fraction: retained_total as f64 / (n * (n - 1)) as f64,
        retained_per_subject,
    })
}

/// Raw covariances `(Y_ik - mu(t_ik)) (Y_il - mu(t_il))` for all
/// off-diagonal pairs, with the mean interpolated from its grid.
pub fn raw_covariance_baseline(dataset: &Dataset, mean: &Curve) -> Result<Vec<RawSurfacePoint>> {
    let mut points = Vec::new();
    let mut centered = Vec::new();
    for (i, sample) in dataset.samples().iter().enumerate() {
        let m = sample.len();
        if m < 2 {
            continue;
        }
        centered.clear();
        for (&t, &y) in sample.times().iter().zip(sample.values()) {
            let mu = mean.eval(t).ok_or_else(|| Error::OutOfDomain {
                subject: sample.subject_id().into(),
                time: t,
                lower: mean.grid().lower(),
                upper: mean.grid().upper(),
            })?;
            centered.push(y - mu);
        }
        for k in 0..m {
            for l in 0..m {
                if k != l {
                    points.push(RawSurfacePoint {
                        s: sample.times()[k],
                        t: sample.times()[l],
                        value: centered[k] * centered[l],
                        subject_index: i,
                    });
                }
            }
        }
    }
    Ok(points)
}
