//! Principal component scores, truncated trajectory prediction and the
//! prediction mean-square-error protocol.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Curve, Dataset, SparseSample};
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::linalg::least_squares_min_norm;
use crate::smoothing::{Bandwidths, GcvEntry};

/// Diagnostics carried along with a fitted model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub dropped_comparisons: usize,
    pub retained_comparisons: usize,
    pub retained_fraction: f64,
    pub n_raw_points: usize,
    pub surface_gcv: Vec<GcvEntry>,
    pub mean_gcv: Vec<GcvEntry>,
    pub surface_local_constant_nodes: usize,
    pub mean_local_constant_nodes: usize,
}

/// Mean, eigenfunctions and truncation level used for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub mean: Curve,
    pub eigen: EigenSystem,
    pub truncation: usize,
    pub bandwidths: Bandwidths,
    #[serde(default)]
    pub diagnostics: FitDiagnostics,
}

impl FittedModel {
    pub fn new(
        mean: Curve,
        eigen: EigenSystem,
        truncation: usize,
        bandwidths: Bandwidths,
        diagnostics: FitDiagnostics,
    ) -> Result<Self> {
        let model = Self {
            mean,
            eigen,
            truncation,
            bandwidths,
            diagnostics,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 || self.truncation > self.eigen.n_components() {
            return Err(Error::InvalidParameter(format!(
                "truncation {} must lie in [1, {}]",
                self.truncation,
                self.eigen.n_components()
            )));
        }
        if self.mean.grid() != &self.eigen.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Copy with a different truncation level.
    pub fn with_truncation(&self, truncation: usize) -> Result<Self> {
        let mut m = self.clone();
        m.truncation = truncation;
        m.validate()?;
        Ok(m)
    }

    fn eval_mean(&self, subject: &str, t: f64) -> Result<f64> {
        self.mean.eval(t).ok_or_else(|| self.out_of_domain(subject, t))
    }

    fn out_of_domain(&self, subject: &str, t: f64) -> Error {
        Error::OutOfDomain {
            subject: subject.into(),
            time: t,
            lower: self.mean.grid().lower(),
            upper: self.mean.grid().upper(),
        }
    }
}

/// Least-squares scores of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    pub subject_id: String,
    /// Empty unless `usable`.
    pub scores: Vec<f64>,
    /// `m_i > L`.
    pub usable: bool,
    /// The design matrix was rank deficient; scores are minimum-norm.
    pub rank_deficient: bool,
}

/// Scores by ordinary least squares.
pub fn estimate_scores(model: &FittedModel, sample: &SparseSample) -> Result<ScoreEstimate> {
    estimate_scores_weighted(model, sample, None)
}

/// Scores by weighted least squares of the centered responses on the
/// interpolated eigenfunctions. `weights = None` means identity weights.
pub fn estimate_scores_weighted(
    model: &FittedModel,
    sample: &SparseSample,
    weights: Option<&[f64]>,
) -> Result<ScoreEstimate> {
    model.validate()?;
    let l = model.truncation;
    let m = sample.len();
    let id = sample.subject_id();
    if m <= l {
        return Ok(ScoreEstimate {
            subject_id: id.into(),
            scores: Vec::new(),
            usable: false,
            rank_deficient: false,
        });
    }
    if let Some(w) = weights {
        if w.len() != m || w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "subject {id}: need {m} nonnegative finite weights"
            )));
        }
    }
    let mut design = Vec::with_capacity(m * l);
    let mut rhs = Vec::with_capacity(m);
    for (q, (&t, &y)) in sample.times().iter().zip(sample.values()).enumerate() {
        let sw = weights.map_or(1.0, |w| libm::sqrt(w[q]));
        for phi in &model.eigen.eigenfunctions[..l] {
            let v = phi.eval(t).ok_or_else(|| model.out_of_domain(id, t))?;
            design.push(sw * v);
        }
        rhs.push(sw * (y - model.eval_mean(id, t)?));
    }
    let (scores, rank_deficient) = least_squares_min_norm(&design, m, l, &rhs);
    Ok(ScoreEstimate {
        subject_id: id.into(),
        scores,
        usable: true,
        rank_deficient,
    })
}

/// Truncated expansion `mu(t) + sum_k xi_k phi_k(t)` at the requested times.
pub fn predict_trajectory(model: &FittedModel, scores: &ScoreEstimate, times: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    if !scores.usable || scores.scores.len() != model.truncation {
        return Err(Error::UnusableScores(scores.subject_id.clone()));
    }
    times
        .iter()
        .map(|&t| {
            let mut x = model.eval_mean(&scores.subject_id, t)?;
            for (xi, phi) in scores.scores.iter().zip(&model.eigen.eigenfunctions) {
                x += xi * phi.eval(t).ok_or_else(|| model.out_of_domain(&scores.subject_id, t))?;
            }
            Ok(x)
        })
        .collect()
}

/// Average over usable subjects of the per-subject mean squared prediction
/// error at the observed times.
pub fn prediction_mse(model: &FittedModel, dataset: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    let mut usable = 0usize;
    for sample in dataset.samples() {
        let est = estimate_scores(model, sample)?;
        if !est.usable {
            continue;
        }
        let pred = predict_trajectory(model, &est, sample.times())?;
        let sse: f64 = pred.iter().zip(sample.values()).map(|(p, y)| (y - p) * (y - p)).sum();
        total += sse / sample.len() as f64;
        usable += 1;
    }
    if usable == 0 {
        return Err(Error::NoUsableSubjects {
            truncation: model.truncation,
        });
    }
    Ok(total / usable as f64)
}

/// Random subject-level split into `(train, test)`.
///
/// The test part has `round(N * test_fraction)` subjects; both parts must
/// keep at least two subjects. Subjects keep their original order.
pub fn train_test_split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = dataset.n_subjects();
    let n_test = libm::round(n as f64 * test_fraction) as usize;
    if n_test < 2 || n - n_test < 2 {
        return Err(Error::TooFewSubjects(n_test.min(n - n_test)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Domain, Grid};
    use crate::eigen::EigenSystem;
    use alloc::string::ToString;
    use alloc::vec;
    use core::f64::consts::PI;

    fn model(l: usize) -> FittedModel {
        let grid = Grid::new(Domain::new(0.0, 10.0).unwrap(), 201).unwrap();
        let r5 = libm::sqrt(5.0);
        let phi1 = Curve::from_fn(&grid, |t| libm::cos(PI * t / 10.0) / r5).unwrap();
        let phi2 = Curve::from_fn(&grid, |t| libm::sin(PI * t / 10.0) / r5).unwrap();
        let mean = Curve::from_fn(&grid, |t| t + libm::sin(t)).unwrap();
        let eigen = EigenSystem {
            grid: grid.clone(),
            eigenvalues: vec![9.0, 1.5],
            eigenfunctions: vec![phi1, phi2],
            rank_deficient: false,
        };
        let bw = Bandwidths {
            h_prime: Some(1.0),
            h: 1.0,
            h_mu: 1.0,
        };
        FittedModel::new(mean, eigen, l, bw, FitDiagnostics::default()).unwrap()
    }

    fn sample_from(model: &FittedModel, id: &str, times: &[f64], xi: &[f64]) -> SparseSample {
        let values = times
            .iter()
            .map(|&t| {
                let mut y = model.mean.eval(t).unwrap();
                for (x, phi) in xi.iter().zip(&model.eigen.eigenfunctions) {
                    y += x * phi.eval(t).unwrap();
                }
                y
            })
            .collect();
        SparseSample::new(id, times.to_vec(), values).unwrap()
    }

    #[test]
    fn recovers_constructed_scores() {
        let m = model(2);
        let s = sample_from(&m, "a", &[0.5, 2.0, 4.5, 7.0, 9.5], &[2.0, -1.0]);
        let est = estimate_scores(&m, &s).unwrap();
        assert!(est.usable && !est.rank_deficient);
        assert!((est.scores[0] - 2.0).abs() < 1e-6);
        assert!((est.scores[1] + 1.0).abs() < 1e-6);
        let pred = predict_trajectory(&m, &est, s.times()).unwrap();
        for (p, y) in pred.iter().zip(s.values()) {
            assert!((p - y).abs() < 1e-6);
        }
    }

    #[test]
    fn identifiability_rule() {
        let m = model(2);
        let s = sample_from(&m, "a", &[1.0, 2.0], &[1.0, 1.0]);
        let est = estimate_scores(&m, &s).unwrap();
        assert!(!est.usable && est.scores.is_empty());
        assert!(matches!(
            predict_trajectory(&m, &est, &[1.0]),
            Err(Error::UnusableScores(_))
        ));
    }

    #[test]
    fn centered_sample_has_zero_scores() {
        let m = model(2);
        let s = sample_from(&m, "a", &[1.0, 3.0, 6.0], &[]);
        let est = estimate_scores(&m, &s).unwrap();
        assert!(est.scores.iter().all(|x| x.abs() < 1e-10));
        let pred = predict_trajectory(&m, &est, &[0.0, 5.0, 10.0]).unwrap();
        for (p, t) in pred.iter().zip([0.0, 5.0, 10.0]) {
            assert!((p - m.mean.eval(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_term_prediction_is_the_eigenfunction() {
        let m = model(1);
        let est = ScoreEstimate {
            subject_id: "a".into(),
            scores: vec![1.0],
            usable: true,
            rank_deficient: false,
        };
        let times = [0.0, 2.5, 7.3];
        let pred = predict_trajectory(&m, &est, &times).unwrap();
        for (p, &t) in pred.iter().zip(&times) {
            let want = m.eigen.eigenfunctions[0].eval(t).unwrap();
            assert!((p - m.mean.eval(t).unwrap() - want).abs() < 1e-12);
        }
        assert!(matches!(
            predict_trajectory(&m, &est, &[11.0]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn weights_hook() {
        let m = model(2);
        let s = sample_from(&m, "a", &[0.5, 2.0, 4.5, 7.0], &[1.0, 0.5]);
        let w = [1.0, 2.0, 0.5, 3.0];
        let est = estimate_scores_weighted(&m, &s, Some(&w)).unwrap();
        assert!((est.scores[0] - 1.0).abs() < 1e-6 && (est.scores[1] - 0.5).abs() < 1e-6);
        assert!(estimate_scores_weighted(&m, &s, Some(&w[..2])).is_err());
    }

    #[test]
    fn rank_deficient_design_is_flagged() {
        let m = model(2);
        // cos and sin share one value pattern at a single repeated-ish location
        let s = sample_from(&m, "a", &[5.0, 5.0 + 1e-13, 5.0 + 2e-13], &[1.0, 1.0]);
        let est = estimate_scores(&m, &s).unwrap();
        assert!(est.rank_deficient);
    }

    #[test]
    fn mse_offsets_and_usable_subjects() {
        let m = model(2);
        let times = [0.5, 2.0, 4.5, 7.0];
        let mut samples: Vec<SparseSample> = (0..4)
            .map(|i| sample_from(&m, &i.to_string(), &times, &[i as f64, 1.0]))
            .collect();
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), samples.clone()).unwrap();
        assert!(prediction_mse(&m, &ds).unwrap() < 1e-12);

        samples.push(sample_from(&m, "short", &[1.0, 2.0], &[0.0, 0.0]));
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), samples).unwrap();
        assert!(prediction_mse(&m, &ds).unwrap() < 1e-12);

        // phi_1 sums to zero over {0, 5, 10}, so an offset survives the fit
        let m1 = m.with_truncation(1).unwrap();
        let delta = 0.3;
        let offset: Vec<SparseSample> = (0..3)
            .map(|i| sample_from(&m1, &i.to_string(), &[0.0, 5.0, 10.0], &[i as f64]).map_values(|_, y| y + delta))
            .collect();
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), offset).unwrap();
        assert!((prediction_mse(&m1, &ds).unwrap() - delta * delta).abs() < 1e-12);

        let short: Vec<SparseSample> = (0..3)
            .map(|i| sample_from(&m, &i.to_string(), &[1.0, 2.0], &[0.0, 0.0]))
            .collect();
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), short).unwrap();
        assert!(matches!(prediction_mse(&m, &ds), Err(Error::NoUsableSubjects { .. })));
    }

    #[test]
    fn split_partition_and_determinism() {
        let m = model(2);
        let samples: Vec<SparseSample> = (0..10)
            .map(|i| sample_from(&m, &i.to_string(), &[1.0, 2.0, 3.0], &[0.0, 0.0]))
            .collect();
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), samples).unwrap();
        let (train, test) = train_test_split(&ds, 0.2, 42).unwrap();
        assert_eq!((train.n_subjects(), test.n_subjects()), (8, 2));
        let mut ids: Vec<&str> = train
            .samples()
            .iter()
            .chain(test.samples())
            .map(|s| s.subject_id())
            .collect();
        ids.sort_unstable();
        let mut all: Vec<&str> = ds.samples().iter().map(|s| s.subject_id()).collect();
        all.sort_unstable();
        assert_eq!(ids, all);
        assert_eq!(train_test_split(&ds, 0.2, 42).unwrap(), (train, test));
        let (_, big) = train_test_split(&ds, 0.8, 42).unwrap();
        assert_eq!(big.n_subjects(), 8);
        assert!(train_test_split(&ds, 0.05, 1).is_err());
        assert!(train_test_split(&ds, 1.0, 1).is_err());
    }
}
