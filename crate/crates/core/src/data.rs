//! Domain types for sparse, irregularly observed longitudinal data.
//!
//! A [`Dataset`] holds one [`SparseSample`] per subject over a common
//! [`Domain`]. Grid functions (means, eigenfunctions) are [`Curve`]s on an
//! equally spaced [`Grid`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed, bounded time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: f64,
    upper: f64,
}

impl Domain {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::InvalidDomain { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lower && t <= self.upper
    }
}

/// One subject's observations `(t_ij, Y_ij)` with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSample {
    subject_id: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SparseSample {
    pub fn new(subject_id: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let subject_id = subject_id.into();
        let invalid = |reason: String| Error::InvalidSample {
            subject: subject_id.clone(),
            reason,
        };
        if subject_id.is_empty() || subject_id.contains(',') {
            return Err(invalid("subject id must be a non-empty token without commas".into()));
        }
        if times.is_empty() {
            return Err(invalid("no observations".into()));
        }
        if times.len() != values.len() {
            return Err(invalid(format!("{} times but {} values", times.len(), values.len())));
        }
        if let Some(t) = times.iter().chain(values.iter()).find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite entry {t}")));
        }
        for w in times.windows(2) {
            if w[1] == w[0] {
                return Err(Error::DuplicateTime {
                    subject: subject_id,
                    time: w[0],
                });
            }
            if w[1] < w[0] {
                return Err(invalid("times must be strictly increasing".into()));
            }
        }
        Ok(Self {
            subject_id,
            times,
            values,
        })
    }

    /// Builds a sample from unordered `(time, value)` pairs.
    pub fn from_pairs(subject_id: impl Into<String>, mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, values) = pairs.into_iter().unzip();
        Self::new(subject_id, times, values)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of observations `m_i`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Same times with every value mapped through `f`.
    pub fn map_values(&self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = self.times.iter().zip(&self.values).map(|(&t, &y)| f(t, y)).collect();
        Self {
            subject_id: self.subject_id.clone(),
            times: self.times.clone(),
            values,
        }
    }
}

/// Samples from `N >= 2` distinct subjects over a common domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    domain: Domain,
    samples: Vec<SparseSample>,
}

impl Dataset {
    pub fn new(domain: Domain, samples: Vec<SparseSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSubjects(samples.len()));
        }
        let mut seen = BTreeSet::new();
        for s in &samples {
            if !seen.insert(s.subject_id()) {
                return Err(Error::DuplicateSubject(s.subject_id.clone()));
            }
            if let Some(&t) = s.times().iter().find(|&&t| !domain.contains(t)) {
                return Err(Error::OutOfDomain {
                    subject: s.subject_id.clone(),
                    time: t,
                    lower: domain.lower,
                    upper: domain.upper,
                });
            }
        }
        Ok(Self { domain, samples })
    }

    /// Infers the domain as `[min time, max time]`.
    pub fn with_inferred_domain(samples: Vec<SparseSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSubjects(samples.len()));
        }
        let (lo, hi) = samples
            .iter()
            .flat_map(|s| s.times().iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
        Self::new(Domain::new(lo, hi)?, samples)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &[SparseSample] {
        &self.samples
    }

    pub fn n_subjects(&self) -> usize {
        self.samples.len()
    }

    pub fn n_observations(&self) -> usize {
        self.samples.iter().map(SparseSample::len).sum()
    }

    pub fn into_samples(self) -> Vec<SparseSample> {
        self.samples
    }

    /// Subset by sample index, preserving the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Self::new(self.domain, samples)
    }
}

/// Equally spaced grid spanning a domain, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    spacing: f64,
}

impl Grid {
    pub fn new(domain: Domain, size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidGrid(size));
        }
        let spacing = domain.length() / (size - 1) as f64;
        let mut points: Vec<f64> = (0..size).map(|i| domain.lower() + i as f64 * spacing).collect();
        points[size - 1] = domain.upper();
        Ok(Self { points, spacing })
    }

    /// Rebuilds a grid from serialized points, checking equal spacing.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(points.len()));
        }
        let domain = Domain::new(points[0], points[points.len() - 1])?;
        let grid = Self::new(domain, points.len())?;
        let tol = 1e-9 * domain.length().max(1.0);
        if grid.points.iter().zip(&points).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::InvalidParameter("grid points are not equally spaced".into()));
        }
        Ok(grid)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn domain(&self) -> Domain {
        Domain {
            lower: self.lower(),
            upper: self.upper(),
        }
    }

    /// Trapezoid quadrature weights: `spacing/2` at the ends, `spacing` inside.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let g = self.len();
        let mut w = alloc::vec![self.spacing; g];
        w[0] = self.spacing / 2.0;
        w[g - 1] = self.spacing / 2.0;
        w
    }

    /// Index `a` and fraction `f` such that `t` lies between `points[a]` and
    /// `points[a + 1]` at relative position `f`. `None` outside the grid.
    pub(crate) fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let tol = 1e-12 * self.domain().length();
        if !(t >= self.lower() - tol && t <= self.upper() + tol) {
            return None;
        }
        let g = self.len();
        let pos = ((t - self.lower()) / self.spacing).clamp(0.0, (g - 1) as f64);
        let a = (libm::floor(pos) as usize).min(g - 2);
        Some((a, pos - a as f64))
    }

    /// Linear interpolation of grid values at `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> Option<f64> {
        debug_assert_eq!(values.len(), self.len());
        self.locate(t).map(|(a, f)| values[a] * (1.0 - f) + values[a + 1] * f)
    }

    /// Bilinear interpolation of a row-major `G x G` matrix at `(s, t)`.
    pub fn interpolate_2d(&self, values: &[f64], s: f64, t: f64) -> Option<f64> {
        let g = self.len();
        let (a, fs) = self.locate(s)?;
        let (b, ft) = self.locate(t)?;
        let v = |r: usize, c: usize| values[r * g + c];
        Some(
            v(a, b) * (1.0 - fs) * (1.0 - ft)
                + v(a + 1, b) * fs * (1.0 - ft)
                + v(a, b + 1) * (1.0 - fs) * ft
                + v(a + 1, b + 1) * fs * ft,
        )
    }
}

/// A function represented by its values on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("curve".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation at `t`; `None` outside the grid.
    pub fn eval(&self, t: f64) -> Option<f64> {
        self.grid.interpolate(&self.values, t)
    }

    /// Quadrature inner product `sum_g w_g f(s_g) h(s_g)`.
    pub fn inner(&self, other: &Curve) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .grid
            .trapezoid_weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    pub fn integral(&self) -> f64 {
        self.grid
            .trapezoid_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn domain() -> Domain {
        Domain::new(0.0, 10.0).unwrap()
    }

    #[test]
    fn domain_rejects_empty_interval() {
        assert!(Domain::new(1.0, 1.0).is_err());
        assert!(Domain::new(2.0, 1.0).is_err());
        assert!(Domain::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn sample_validation() {
        assert!(SparseSample::new("a", vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
        assert!(SparseSample::new("a", vec![], vec![]).is_err());
        assert!(SparseSample::new("a", vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(SparseSample::new("", vec![0.0], vec![1.0]).is_err());
        assert!(SparseSample::new("a,b", vec![0.0], vec![1.0]).is_err());
        assert!(matches!(
            SparseSample::new("a", vec![0.5, 0.5], vec![1.0, 2.0]),
            Err(Error::DuplicateTime { .. })
        ));
        assert!(SparseSample::new("a", vec![1.0, 0.5], vec![1.0, 2.0]).is_err());
        let s = SparseSample::from_pairs("a", vec![(1.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0]);
        assert_eq!(s.values(), &[1.0, 2.0]);
    }

    #[test]
    fn dataset_validation() {
        let a = SparseSample::new("a", vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let b = SparseSample::new("b", vec![0.5], vec![0.0]).unwrap();
        assert_eq!(Dataset::new(domain(), vec![a.clone()]), Err(Error::TooFewSubjects(1)));
        assert!(matches!(
            Dataset::new(domain(), vec![a.clone(), a.clone()]),
            Err(Error::DuplicateSubject(_))
        ));
        let d = Dataset::with_inferred_domain(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(d.domain(), Domain::new(0.0, 1.0).unwrap());
        let narrow = Domain::new(0.0, 0.8).unwrap();
        assert!(matches!(
            Dataset::new(narrow, vec![a, b]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn grid_endpoints_and_weights() {
        let g = Grid::new(domain(), 51).unwrap();
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[50], 10.0);
        assert!((g.spacing() - 0.2).abs() < 1e-15);
        for w in g.points().windows(2) {
            assert!((w[1] - w[0] - 0.2).abs() < 1e-12);
        }
        let total: f64 = g.trapezoid_weights().iter().sum();
        assert!((total - 10.0).abs() < 1e-12);
        assert!(Grid::new(domain(), 1).is_err());
        assert_eq!(Grid::from_points(g.points().to_vec()).unwrap(), g);
        assert!(Grid::from_points(vec![0.0, 1.0, 3.0]).is_err());
    }

    #[test]
    fn interpolation_reproduces_affine_functions() {
        let g = Grid::new(domain(), 11).unwrap();
        let c = Curve::from_fn(&g, |t| 3.0 - 0.5 * t).unwrap();
        for &t in &[0.0, 0.37, 5.5, 9.99, 10.0] {
            assert!((c.eval(t).unwrap() - (3.0 - 0.5 * t)).abs() < 1e-12);
        }
        assert!(c.eval(-0.1).is_none());
        assert!(c.eval(10.1).is_none());

        let m: Vec<f64> = g
            .points()
            .iter()
            .flat_map(|&s| g.points().iter().map(move |&t| 1.0 + 2.0 * s - t))
            .collect();
        let v = g.interpolate_2d(&m, 3.3, 7.7).unwrap();
        assert!((v - (1.0 + 6.6 - 7.7)).abs() < 1e-12);
    }
}
