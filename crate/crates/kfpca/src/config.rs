//! Resolved run configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use kfpca_core::simulation::{Case, Design, ScoreDistribution, SimulationSpec};
use kfpca_core::{Domain, FitOptions, GcvCount, Kernel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every knob of every subcommand. Unused sections are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Surface and eigenfunction grid size.
    pub grid: usize,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub out: PathBuf,
    /// Long-format CSV read by `fit` and `predict`.
    pub input: Option<PathBuf>,
    /// Observation domain `[lower, upper]`; inferred from the data if absent.
    pub domain: Option<[f64; 2]>,
    pub simulation: SimulationSection,
    pub fit: FitSection,
    pub predict: PredictSection,
    pub bench: BenchSection,
    pub population: PopulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub case: Case,
    pub distribution: ScoreDistribution,
    pub design: Design,
    pub n_subjects: usize,
    pub n_runs: usize,
    pub noise_variance: f64,
    pub eigenvalues: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub h_prime: Option<f64>,
    pub h_candidates: Option<Vec<f64>>,
    pub mean_candidates: Option<Vec<f64>>,
    pub kernel: Kernel,
    pub n_components: usize,
    pub gcv_count: GcvCount,
    /// Also fit the covariance-smoothing baseline.
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Truncation level `L`.
    pub truncation: usize,
    /// Test fraction; when set the model is refit on the training subjects.
    pub split: Option<f64>,
    pub split_seed: u64,
    /// Fitted model JSON, required without `split`.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Cells are the product of these lists; an absent list falls back to
    /// the single value in `simulation`.
    pub cases: Option<Vec<Case>>,
    pub distributions: Option<Vec<ScoreDistribution>>,
    pub designs: Option<Vec<Design>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSection {
    pub n_pairs: usize,
    pub distributions: Option<Vec<ScoreDistribution>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            grid: kfpca_core::pipeline::DEFAULT_GRID_SIZE,
            jobs: None,
            out: PathBuf::from("."),
            input: None,
            domain: None,
            simulation: SimulationSection::default(),
            fit: FitSection::default(),
            predict: PredictSection::default(),
            bench: BenchSection::default(),
            population: PopulationSection::default(),
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        let spec = SimulationSpec::new(Case::One, ScoreDistribution::Gaussian, Design::Dense, 0);
        Self {
            case: spec.case,
            distribution: spec.distribution,
            design: spec.design,
            n_subjects: spec.n_subjects,
            n_runs: spec.n_runs,
            noise_variance: spec.noise_variance,
            eigenvalues: spec.eigenvalues,
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        let opts = FitOptions::default();
        Self {
            h_prime: opts.h_prime,
            h_candidates: opts.surface_candidates,
            mean_candidates: opts.mean_candidates,
            kernel: opts.kernel,
            n_components: opts.n_components,
            gcv_count: opts.gcv_count,
            baseline: false,
        }
    }
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            truncation: 2,
            split: None,
            split_seed: 0,
            model: None,
        }
    }
}

impl Default for PopulationSection {
    fn default() -> Self {
        Self {
            n_pairs: 20_000,
            distributions: None,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config file. Problems with it are usage errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::Usage(format!("grid must be at least 2, got {}", self.grid)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Usage("jobs must be positive".into()));
        }
        if let Some(split) = self.predict.split {
            if !(split > 0.0 && split < 1.0) {
                return Err(Error::Usage(format!("split must lie in (0, 1), got {split}")));
            }
        }
        if self.predict.truncation == 0 {
            return Err(Error::Usage("L must be at least 1".into()));
        }
        if self.fit.n_components == 0 {
            return Err(Error::Usage("n_components must be at least 1".into()));
        }
        self.domain()?;
        self.simulation_spec().validate()?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Option<Domain>> {
        self.domain
            .map(|[lo, hi]| Domain::new(lo, hi).map_err(|e| Error::Usage(e.to_string())))
            .transpose()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            grid_size: self.grid,
            kernel: self.fit.kernel,
            h_prime: self.fit.h_prime,
            surface_candidates: self.fit.h_candidates.clone(),
            mean_candidates: self.fit.mean_candidates.clone(),
            n_components: self.fit.n_components.max(self.predict.truncation),
            gcv_count: self.fit.gcv_count,
        }
    }

    pub fn simulation_spec(&self) -> SimulationSpec {
        let s = &self.simulation;
        SimulationSpec {
            case: s.case,
            distribution: s.distribution,
            design: s.design,
            n_subjects: s.n_subjects,
            n_runs: s.n_runs,
            noise_variance: s.noise_variance,
            eigenvalues: s.eigenvalues,
            seed: self.seed,
        }
    }

    /// Benchmark cells in case, distribution, design order.
    pub fn bench_specs(&self) -> Vec<SimulationSpec> {
        let base = self.simulation_spec();
        let cases = self.bench.cases.clone().unwrap_or_else(|| vec![base.case]);
        let dists = self
            .bench
            .distributions
            .clone()
            .unwrap_or_else(|| vec![base.distribution]);
        let designs = self.bench.designs.clone().unwrap_or_else(|| vec![base.design]);
        let mut specs = Vec::new();
        for &case in &cases {
            for &distribution in &dists {
                for &design in &designs {
                    specs.push(SimulationSpec {
                        case,
                        distribution,
                        design,
                        ..base.clone()
                    });
                }
            }
        }
        specs
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Usage("an input CSV is required (--input)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 7, "simulation": {"case": 2}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.simulation.case, Case::Two);
        assert_eq!(cfg.simulation.n_subjects, 100);
        assert_eq!(cfg.grid, 51);
        assert_eq!(cfg.predict.truncation, 2);
    }

    #[test]
    fn round_trips_and_rejects_unknown_fields() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"simulation": {"case": 5}}"#).is_err());
    }

    #[test]
    fn bench_cells_are_a_product() {
        let mut cfg = RunConfig::default();
        cfg.bench.cases = Some(Case::ALL.to_vec());
        cfg.bench.distributions = Some(ScoreDistribution::ALL.to_vec());
        cfg.bench.designs = Some(vec![Design::Dense, Design::Sparse]);
        let specs = cfg.bench_specs();
        assert_eq!(specs.len(), 32);
        assert!(specs.iter().all(|s| s.seed == 42));
        assert_eq!(RunConfig::default().bench_specs().len(), 1);
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.predict.split = Some(1.5);
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        let mut cfg = RunConfig::default();
        cfg.simulation.n_runs = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        let mut cfg = RunConfig::default();
        cfg.domain = Some([1.0, 0.0]);
        assert!(cfg.validate().is_err());
    }
}
