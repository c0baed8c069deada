//! Synthetic longitudinal data with known eigenfunctions, the benchmark
//! comparing Kendall FPCA with covariance smoothing, and a Monte-Carlo
//! population Kendall's tau surface.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::{Curve, Dataset, Domain, Grid, SparseSample};
use crate::eigen::{angle, imse};
use crate::error::{Error, Result};
use crate::pipeline::{fit_baseline, fit_kfpca, FitOptions};
use crate::smoothing::SurfaceEstimate;

/// Simulation time domain `[0, 10]`.
pub const SIM_LOWER: f64 = 0.0;
pub const SIM_UPPER: f64 = 10.0;
/// Number of points of the jittered design grid `c_0, ..., c_50`.
pub const DESIGN_GRID_POINTS: usize = 51;
/// Variance of the design-grid jitter.
pub const JITTER_VARIANCE: f64 = 0.1;

/// Degrees of freedom of the elliptical Student-t used for EC2 scores.
pub const EC2_DF: f64 = 4.0;
/// Shape and degrees of freedom of the skew-t scores.
pub const SKEW_T_SHAPE: f64 = 5.0;
pub const SKEW_T_DF: f64 = 5.0;

pub fn simulation_domain() -> Domain {
    Domain::new(SIM_LOWER, SIM_UPPER).expect("static domain")
}

/// Mean function `t + sin(t)`.
pub fn true_mean(t: f64) -> f64 {
    t + libm::sin(t)
}

/// Eigenfunction pair of the simulation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Case {
    One,
    Two,
    Three,
    Four,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::One, Case::Two, Case::Three, Case::Four];

    pub fn number(self) -> u8 {
        match self {
            Case::One => 1,
            Case::Two => 2,
            Case::Three => 3,
            Case::Four => 4,
        }
    }

    /// `(phi_1(t), phi_2(t))`.
    pub fn eigenfunctions_at(self, t: f64) -> (f64, f64) {
        let r5 = libm::sqrt(5.0);
        let (a, b) = match self {
            Case::One => (libm::cos(PI * t / 10.0), libm::sin(PI * t / 10.0)),
            Case::Two => (libm::cos(PI * t / 10.0), libm::cos(PI * t / 5.0)),
            Case::Three => (libm::cos(PI * t / 5.0), libm::sin(PI * t / 5.0)),
            Case::Four => (libm::cos(PI * t / 5.0), libm::sin(2.0 * PI * t / 5.0)),
        };
        (a / r5, b / r5)
    }
}

impl TryFrom<u8> for Case {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            3 => Ok(Case::Three),
            4 => Ok(Case::Four),
            other => Err(Error::InvalidParameter(format!("unknown case {other} (expected 1-4)"))),
        }
    }
}

impl From<Case> for u8 {
    fn from(c: Case) -> u8 {
        c.number()
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| Error::InvalidParameter(format!("unknown case {s}")))
            .and_then(Case::try_from)
    }
}

/// Law of the standardized principal component scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDistribution {
    Gaussian,
    MixGaussian,
    Ec2,
    SkewT,
}

impl ScoreDistribution {
    pub const ALL: [ScoreDistribution; 4] = [
        ScoreDistribution::Gaussian,
        ScoreDistribution::MixGaussian,
        ScoreDistribution::Ec2,
        ScoreDistribution::SkewT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreDistribution::Gaussian => "gaussian",
            ScoreDistribution::MixGaussian => "mix_gaussian",
            ScoreDistribution::Ec2 => "ec2",
            ScoreDistribution::SkewT => "skew_t",
        }
    }
}

impl fmt::Display for ScoreDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown distribution {s}")))
    }
}

/// Observation-count regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// 8 to 12 observations per subject.
    Dense,
    /// 2 to 5 observations per subject.
    Sparse,
}

impl Design {
    pub fn count_range(self) -> (usize, usize) {
        match self {
            Design::Dense => (8, 12),
            Design::Sparse => (2, 5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Design::Dense => "dense",
            Design::Sparse => "sparse",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Design::Dense),
            "sparse" => Ok(Design::Sparse),
            other => Err(Error::InvalidParameter(format!("unknown design {other}"))),
        }
    }
}

fn default_subjects() -> usize {
    100
}
fn default_runs() -> usize {
    100
}
fn default_noise() -> f64 {
    0.1
}
fn default_eigenvalues() -> [f64; 2] {
    [9.0, 1.5]
}

/// One cell of the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub case: Case,
    pub distribution: ScoreDistribution,
    pub design: Design,
    #[serde(default = "default_subjects")]
    pub n_subjects: usize,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
    #[serde(default = "default_eigenvalues")]
    pub eigenvalues: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(case: Case, distribution: ScoreDistribution, design: Design, seed: u64) -> Self {
        Self {
            case,
            distribution,
            design,
            n_subjects: default_subjects(),
            n_runs: default_runs(),
            noise_variance: default_noise(),
            eigenvalues: default_eigenvalues(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::InvalidParameter("n_subjects must be at least 2".into()));
        }
        if self.n_runs < 1 {
            return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidParameter("noise_variance must be nonnegative".into()));
        }
        if self.eigenvalues.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("eigenvalues must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Independent random substream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The case's `(phi_1, phi_2)` on `grid`, which must span `[0, 10]`.
pub fn true_eigenfunctions(case: Case, grid: &Grid) -> Result<(Curve, Curve)> {
    if grid.domain() != simulation_domain() {
        return Err(Error::GridMismatch);
    }
    let phi1 = Curve::from_fn(grid, |t| case.eigenfunctions_at(t).0)?;
    let phi2 = Curve::from_fn(grid, |t| case.eigenfunctions_at(t).1)?;
    Ok((phi1, phi2))
}

/// Draws scores with mean zero and variance `eigenvalue` under one law.
#[derive(Debug, Clone, Copy)]
pub struct ScoreSampler {
    distribution: ScoreDistribution,
    scale: f64,
    ec2: StudentT<f64>,
    chi2: ChiSquared<f64>,
    skew_delta: f64,
    skew_mean: f64,
    skew_sd: f64,
}

impl ScoreSampler {
    pub fn new(distribution: ScoreDistribution, eigenvalue: f64) -> Result<Self> {
        if !(eigenvalue >= 0.0 && eigenvalue.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue {eigenvalue} must be nonnegative"
            )));
        }
        let nu = SKEW_T_DF;
        let alpha = SKEW_T_SHAPE;
        let delta = alpha / libm::sqrt(1.0 + alpha * alpha);
        let mean = delta * libm::sqrt(nu / PI) * libm::tgamma((nu - 1.0) / 2.0) / libm::tgamma(nu / 2.0);
        let var = nu / (nu - 2.0) - mean * mean;
        Ok(Self {
            distribution,
            scale: libm::sqrt(eigenvalue),
            ec2: StudentT::new(EC2_DF).expect("positive df"),
            chi2: ChiSquared::new(nu).expect("positive df"),
            skew_delta: delta,
            skew_mean: mean,
            skew_sd: libm::sqrt(var),
        })
    }

    /// Unit-variance, zero-mean draw.
    fn standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.distribution {
            ScoreDistribution::Gaussian => rng.sample(StandardNormal),
            ScoreDistribution::MixGaussian => {
                let h = libm::sqrt(0.5);
                let centre = if rng.random::<bool>() { h } else { -h };
                let z: f64 = rng.sample(StandardNormal);
                centre + h * z
            }
            ScoreDistribution::Ec2 => {
                let t = self.ec2.sample(rng);
                t * libm::sqrt((EC2_DF - 2.0) / EC2_DF)
            }
            ScoreDistribution::SkewT => {
                let u0: f64 = rng.sample(StandardNormal);
                let u1: f64 = rng.sample(StandardNormal);
                let d = self.skew_delta;
                let z = d * u0.abs() + libm::sqrt(1.0 - d * d) * u1;
                let w = self.chi2.sample(rng);
                let t = z / libm::sqrt(w / SKEW_T_DF);
                (t - self.skew_mean) / self.skew_sd
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.standardized(rng)
    }
}

/// `n` independent scores with mean 0 and variance `eigenvalue`.
pub fn draw_scores<R: Rng + ?Sized>(
    distribution: ScoreDistribution,
    eigenvalue: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let sampler = ScoreSampler::new(distribution, eigenvalue)?;
    Ok((0..n).map(|_| sampler.sample(rng)).collect())
}

/// A simulated dataset together with the true scores of every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub true_scores: Vec<[f64; 2]>,
}

/// Jittered design locations `s_1, ..., s_49` (distinct after clamping).
fn jittered_locations<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    let spacing = (SIM_UPPER - SIM_LOWER) / (DESIGN_GRID_POINTS - 1) as f64;
    let jitter = Normal::new(0.0, libm::sqrt(JITTER_VARIANCE)).expect("positive sd");
    loop {
        let s: Vec<f64> = (0..DESIGN_GRID_POINTS)
            .map(|i| {
                let c = SIM_LOWER + i as f64 * spacing;
                (c + jitter.sample(rng)).clamp(SIM_LOWER, SIM_UPPER)
            })
            .collect();
        let mut inner = s[1..DESIGN_GRID_POINTS - 1].to_vec();
        inner.sort_by(f64::total_cmp);
        // two locations clamped onto the same endpoint would collide
        if inner.windows(2).all(|w| w[0] < w[1]) {
            return s[1..DESIGN_GRID_POINTS - 1].to_vec();
        }
    }
}

/// Generates one replicate of the simulation design.
pub fn generate_dataset<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedData> {
    spec.validate()?;
    let locations = jittered_locations(rng);
    let (lo, hi) = spec.design.count_range();
    let first = ScoreSampler::new(spec.distribution, spec.eigenvalues[0])?;
    let second = ScoreSampler::new(spec.distribution, spec.eigenvalues[1])?;
    let noise_sd = libm::sqrt(spec.noise_variance);

    let mut samples = Vec::with_capacity(spec.n_subjects);
    let mut true_scores = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        let m = rng.random_range(lo..=hi);
        let mut times: Vec<f64> = index::sample(rng, locations.len(), m)
            .into_iter()
            .map(|k| locations[k])
            .collect();
        times.sort_by(f64::total_cmp);
        let xi = [first.sample(rng), second.sample(rng)];
        let values = times
            .iter()
            .map(|&t| {
                let (p1, p2) = spec.case.eigenfunctions_at(t);
                let eps: f64 = if noise_sd > 0.0 {
                    noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                true_mean(t) + xi[0] * p1 + xi[1] * p2 + eps
            })
            .collect();
        samples.push(SparseSample::new((i + 1).to_string(), times, values)?);
        true_scores.push(xi);
    }
    Ok(GeneratedData {
        dataset: Dataset::new(simulation_domain(), samples)?,
        true_scores,
    })
}

/// Monte-Carlo population Kendall's tau surface of the noiseless model.
pub fn population_kendall_oracle<R: Rng + ?Sized>(
    case: Case,
    distribution: ScoreDistribution,
    n_pairs: usize,
    grid: &Grid,
    rng: &mut R,
) -> Result<SurfaceEstimate> {
    population_kendall_oracle_scaled(case, distribution, [9.0, 1.5], n_pairs, grid, 1.0, rng)
}

/// As [`population_kendall_oracle`], with explicit eigenvalues and every
/// curve multiplied by `scale`.
///
/// Each independent pair `(X, X~)` contributes
/// `(X(s) - X~(s)) (X(t) - X~(t)) / ||X - X~||^2`, the norm taken by
/// trapezoid quadrature on `grid`. Pairs with a vanishing norm are redrawn.
pub fn population_kendall_oracle_scaled<R: Rng + ?Sized>(
    case: Case,
    distribution: ScoreDistribution,
    eigenvalues: [f64; 2],
    n_pairs: usize,
    grid: &Grid,
    scale: f64,
    rng: &mut R,
) -> Result<SurfaceEstimate> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be at least 1".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
    }
    let (phi1, phi2) = true_eigenfunctions(case, grid)?;
    let first = ScoreSampler::new(distribution, eigenvalues[0])?;
    let second = ScoreSampler::new(distribution, eigenvalues[1])?;
    let w = grid.trapezoid_weights();
    let mu: Vec<f64> = grid.points().iter().map(|&t| true_mean(t)).collect();
    let g = grid.len();

    let curve = |xi: [f64; 2]| -> Vec<f64> {
        (0..g)
            .map(|k| scale * (mu[k] + xi[0] * phi1.values()[k] + xi[1] * phi2.values()[k]))
            .collect()
    };
    let mut acc = vec![0.0; g * g];
    let mut diff = vec![0.0; g];
    for _ in 0..n_pairs {
        let norm2 = loop {
            let x = curve([first.sample(rng), second.sample(rng)]);
            let y = curve([first.sample(rng), second.sample(rng)]);
            for k in 0..g {
                diff[k] = x[k] - y[k];
            }
            let n2: f64 = diff.iter().zip(&w).map(|(d, wk)| wk * d * d).sum();
            if n2 >= 1e-12 {
                break n2;
            }
        };
        for a in 0..g {
            let da = diff[a] / norm2;
            for b in a..g {
                acc[a * g + b] += da * diff[b];
            }
        }
    }
    let inv = 1.0 / n_pairs as f64;
    for a in 0..g {
        for b in a..g {
            let v = acc[a * g + b] * inv;
            acc[a * g + b] = v;
            acc[b * g + a] = v;
        }
    }
    SurfaceEstimate::symmetrized(grid.clone(), acc)
}

/// IMSE and angle of the two leading eigenfunctions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub imse1: f64,
    pub imse2: f64,
    pub angle1: f64,
    pub angle2: f64,
}

impl MethodMetrics {
    pub const NAMES: [&'static str; 4] = ["imse1", "imse2", "angle1", "angle2"];

    pub fn to_array(self) -> [f64; 4] {
        [self.imse1, self.imse2, self.angle1, self.angle2]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            imse1: a[0],
            imse2: a[1],
            angle1: a[2],
            angle2: a[3],
        }
    }

    /// Compares estimated `(phi_1, phi_2)` with the truth, in order.
    pub fn compare(truth: &(Curve, Curve), estimate: &[Curve]) -> Result<Self> {
        if estimate.len() < 2 {
            return Err(Error::InvalidParameter("need two estimated eigenfunctions".into()));
        }
        Ok(Self {
            imse1: imse(&truth.0, &estimate[0])?,
            imse2: imse(&truth.1, &estimate[1])?,
            angle1: angle(&truth.0, &estimate[0])?,
            angle2: angle(&truth.1, &estimate[1])?,
        })
    }
}

/// Per-run outcome of both methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub kfpca: MethodMetrics,
    pub baseline: MethodMetrics,
    pub h_prime: f64,
    pub kfpca_bandwidth: f64,
    pub baseline_bandwidth: f64,
    pub retained_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
}

/// Means and standard errors over completed runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: MethodMetrics,
    pub std_err: MethodMetrics,
}

impl MetricSummary {
    fn from_runs(runs: &[MethodMetrics]) -> Option<Self> {
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let mut mean = [0.0; 4];
        for r in runs {
            for (m, v) in mean.iter_mut().zip(r.to_array()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut se = [0.0; 4];
        if runs.len() > 1 {
            for r in runs {
                for ((s, v), m) in se.iter_mut().zip(r.to_array()).zip(mean) {
                    *s += (v - m) * (v - m);
                }
            }
            se.iter_mut()
                .for_each(|s| *s = libm::sqrt(*s / (n - 1.0)) / libm::sqrt(n));
        }
        Some(Self {
            mean: MethodMetrics::from_array(mean),
            std_err: MethodMetrics::from_array(se),
        })
    }
}

/// Results of a benchmark sweep over one simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub spec: SimulationSpec,
    pub options: FitOptions,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub n_completed: usize,
    pub n_excluded: usize,
    pub kfpca: Option<MetricSummary>,
    pub baseline: Option<MetricSummary>,
}

impl BenchmarkReport {
    /// Assembles the report from per-run outcomes in any order; runs are
    /// sorted by index before aggregation.
    pub fn from_outcomes(spec: SimulationSpec, options: FitOptions, outcomes: Vec<(usize, Result<RunRecord>)>) -> Self {
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (run, outcome) in outcomes {
            match outcome {
                Ok(r) => runs.push(r),
                Err(e) => failures.push(RunFailure {
                    run,
                    message: e.to_string(),
                }),
            }
        }
        runs.sort_by_key(|r| r.run);
        failures.sort_by_key(|f| f.run);
        let kfpca: Vec<MethodMetrics> = runs.iter().map(|r| r.kfpca).collect();
        let baseline: Vec<MethodMetrics> = runs.iter().map(|r| r.baseline).collect();
        Self {
            n_completed: runs.len(),
            n_excluded: failures.len(),
            kfpca: MetricSummary::from_runs(&kfpca),
            baseline: MetricSummary::from_runs(&baseline),
            spec,
            options,
            runs,
            failures,
        }
    }
}

/// Generates replicate `run` and fits both methods on it.
pub fn run_single(spec: &SimulationSpec, options: &FitOptions, run: usize) -> Result<RunRecord> {
    let mut rng = substream(spec.seed, run as u64);
    let data = generate_dataset(spec, &mut rng)?;
    let grid = Grid::new(simulation_domain(), options.grid_size)?;
    let truth = true_eigenfunctions(spec.case, &grid)?;
    let mut opts = options.clone();
    opts.n_components = opts.n_components.max(2);
    let kfpca = fit_kfpca(&data.dataset, &opts)?;
    let baseline = fit_baseline(&data.dataset, &opts)?;
    Ok(RunRecord {
        run,
        kfpca: MethodMetrics::compare(&truth, &kfpca.eigen.eigenfunctions)?,
        baseline: MethodMetrics::compare(&truth, &baseline.eigen.eigenfunctions)?,
        h_prime: kfpca.h_prime,
        kfpca_bandwidth: kfpca.selection.bandwidth,
        baseline_bandwidth: baseline.selection.bandwidth,
        retained_fraction: kfpca.raw.retained_fraction,
    })
}

/// Runs every replicate of `spec` sequentially.
pub fn run_benchmark(spec: &SimulationSpec, options: &FitOptions) -> Result<BenchmarkReport> {
    spec.validate()?;
    let outcomes = (0..spec.n_runs)
        .map(|run| (run, run_single(spec, options, run)))
        .collect();
    Ok(BenchmarkReport::from_outcomes(spec.clone(), options.clone(), outcomes))
}
