//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kfpca_core::simulation::{
    generate_dataset, simulation_domain, substream, true_eigenfunctions, true_mean, Case, Design, ScoreDistribution,
};
use kfpca_core::{
    baseline_model, estimate_scores, fit_baseline, fit_kfpca, fit_mean, fit_model, kfpca_model, predict_trajectory,
    prediction_mse, train_test_split, Curve, Dataset, FittedModel, Grid, Kernel, Method, ScoreEstimate,
};
use serde_json::json;

use crate::bench::{run_cells, verify_population};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, EigenJson, Prediction, SurfaceJson};

#[derive(Debug, Parser)]
#[command(
    name = "kfpca",
    version,
    about = "Kendall's tau functional principal component analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its hidden truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Fit Kendall FPCA (and optionally the covariance baseline) to a CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Estimate scores, predict trajectories and report prediction MSE.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitFlags,
        #[arg(long = "L", value_name = "INT")]
        truncation: Option<usize>,
        /// Test fraction; refits on the training subjects.
        #[arg(long, value_name = "REAL")]
        split: Option<f64>,
        #[arg(long, value_name = "INT")]
        split_seed: Option<u64>,
        /// Fitted model JSON written by `fit`.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Monte-Carlo comparison of both methods over simulation cells.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimFlags,
        #[command(flatten)]
        fit: FitFlags,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        cases: Option<Vec<Case>>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        distributions: Option<Vec<ScoreDistribution>>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        designs: Option<Vec<Design>>,
    },
    /// Check that the population Kendall surface has the true eigenfunctions.
    #[command(name = "verify-theorem1")]
    VerifyPopulation {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "INT")]
        case: Option<Case>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        distributions: Option<Vec<ScoreDistribution>>,
        #[arg(long, value_name = "INT")]
        n_pairs: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "INT")]
    pub grid: Option<usize>,
    #[arg(long, value_name = "INT")]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Observation domain as `LOWER,UPPER`.
    #[arg(long, value_parser = parse_domain, value_name = "LOWER,UPPER")]
    pub domain: Option<[f64; 2]>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct SimFlags {
    #[arg(long, value_name = "INT")]
    pub case: Option<Case>,
    #[arg(long, value_name = "NAME")]
    pub distribution: Option<ScoreDistribution>,
    #[arg(long, value_name = "NAME")]
    pub design: Option<Design>,
    #[arg(long, value_name = "INT")]
    pub n_subjects: Option<usize>,
    #[arg(long, value_name = "INT")]
    pub n_runs: Option<usize>,
    #[arg(long, value_name = "REAL")]
    pub noise_variance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitFlags {
    #[arg(long, value_name = "REAL")]
    pub h_prime: Option<f64>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub h_candidates: Option<Vec<f64>>,
    #[arg(long, value_name = "NAME")]
    pub kernel: Option<Kernel>,
    #[arg(long, value_name = "INT")]
    pub components: Option<usize>,
    /// Also fit the covariance-smoothing baseline (for `predict`, use it
    /// instead of Kendall FPCA).
    #[arg(long)]
    pub baseline: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.grid, self.grid);
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        set(&mut cfg.out, self.out.clone());
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if self.domain.is_some() {
            cfg.domain = self.domain;
        }
        Ok(cfg)
    }
}

impl SimFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.simulation;
        set(&mut s.case, self.case);
        set(&mut s.distribution, self.distribution);
        set(&mut s.design, self.design);
        set(&mut s.n_subjects, self.n_subjects);
        set(&mut s.n_runs, self.n_runs);
        set(&mut s.noise_variance, self.noise_variance);
    }
}

impl FitFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let f = &mut cfg.fit;
        if self.h_prime.is_some() {
            f.h_prime = self.h_prime;
        }
        if self.h_candidates.is_some() {
            f.h_candidates = self.h_candidates.clone();
        }
        set(&mut f.kernel, self.kernel);
        set(&mut f.n_components, self.components);
        f.baseline |= self.baseline;
    }
}

fn parse_domain(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts[..] else {
        return Err("expected LOWER,UPPER".into());
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok([num(lo)?, num(hi)?])
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors go to stderr as a JSON object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report(&Error::Usage(e.to_string().trim_end().to_string()));
            return 1;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &Error) {
    let body = json!({ "error": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() });
    let _ = writeln!(std::io::stderr(), "{body}");
}

fn execute(command: Command) -> Result<()> {
    let (cfg, mode, dump) = resolve(command)?;
    if dump {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match mode {
        Mode::Simulate => cmd_simulate(&cfg),
        Mode::Fit => cmd_fit(&cfg),
        Mode::Predict => cmd_predict(&cfg),
        Mode::Bench => cmd_bench(&cfg),
        Mode::Population(case) => cmd_verify_population(&cfg, case),
    }
}

enum Mode {
    Simulate,
    Fit,
    Predict,
    Bench,
    Population(Option<Case>),
}

fn resolve(command: Command) -> Result<(RunConfig, Mode, bool)> {
    Ok(match command {
        Command::Simulate { common, sim } => {
            let mut cfg = common.resolve()?;
            sim.apply(&mut cfg);
            (cfg, Mode::Simulate, common.dump_config)
        }
        Command::Fit { common, fit } => {
            let mut cfg = common.resolve()?;
            fit.apply(&mut cfg);
            (cfg, Mode::Fit, common.dump_config)
        }
        Command::Predict {
            common,
            fit,
            truncation,
            split,
            split_seed,
            model,
        } => {
            let mut cfg = common.resolve()?;
            fit.apply(&mut cfg);
            set(&mut cfg.predict.truncation, truncation);
            if split.is_some() {
                cfg.predict.split = split;
            }
            set(&mut cfg.predict.split_seed, split_seed);
            if model.is_some() {
                cfg.predict.model = model;
            }
            (cfg, Mode::Predict, common.dump_config)
        }
        Command::Bench {
            common,
            sim,
            fit,
            cases,
            distributions,
            designs,
        } => {
            let mut cfg = common.resolve()?;
            sim.apply(&mut cfg);
            fit.apply(&mut cfg);
            if cases.is_some() {
                cfg.bench.cases = cases;
            }
            if distributions.is_some() {
                cfg.bench.distributions = distributions;
            }
            if designs.is_some() {
                cfg.bench.designs = designs;
            }
            (cfg, Mode::Bench, common.dump_config)
        }
        Command::VerifyPopulation {
            common,
            case,
            distributions,
            n_pairs,
        } => {
            let mut cfg = common.resolve()?;
            set(&mut cfg.simulation.case, case);
            if distributions.is_some() {
                cfg.population.distributions = distributions;
            }
            set(&mut cfg.population.n_pairs, n_pairs);
            (cfg, Mode::Population(case), common.dump_config)
        }
    })
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Writes `data.csv` and `truth.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.simulation_spec();
    spec.validate()?;
    let mut rng = substream(spec.seed, 0);
    let data = generate_dataset(&spec, &mut rng)?;
    let grid = Grid::new(simulation_domain(), cfg.grid)?;
    let (phi1, phi2) = true_eigenfunctions(spec.case, &grid)?;
    let mean = Curve::from_fn(&grid, true_mean)?;
    let scores: Vec<_> = data
        .dataset
        .samples()
        .iter()
        .zip(&data.true_scores)
        .map(|(s, xi)| json!({ "subject_id": s.subject_id(), "scores": xi }))
        .collect();
    io::write_long_csv(&data.dataset, &out(cfg, "data.csv"))?;
    io::write_json(
        &json!({
            "spec": spec,
            "grid": grid.points(),
            "mean": mean.values(),
            "eigenvalues": spec.eigenvalues,
            "eigenfunctions": [phi1.values(), phi2.values()],
            "true_scores": scores,
        }),
        &out(cfg, "truth.json"),
    )
}

fn read_input(cfg: &RunConfig) -> Result<Dataset> {
    io::read_long_csv(cfg.input()?, cfg.domain()?)
}

fn write_eigen(cfg: &RunConfig, prefix: &str, eigen: &kfpca_core::EigenSystem) -> Result<()> {
    io::write_json(&EigenJson::new(eigen), &out(cfg, &format!("{prefix}eigen.json")))?;
    for (k, phi) in eigen.eigenfunctions.iter().enumerate() {
        io::write_curve_csv(phi, &out(cfg, &format!("{prefix}eigenfunction_{}.csv", k + 1)))?;
    }
    Ok(())
}

/// Writes the Kendall surface, raw points, eigensystem, diagnostics and
/// model; with `fit.baseline` also the baseline counterparts.
pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let dataset = read_input(cfg)?;
    let opts = cfg.fit_options();
    let mean = fit_mean(&dataset, &opts)?;
    let fit = fit_kfpca(&dataset, &opts)?;
    let model = kfpca_model(&mean, &fit, opts.n_components)?;
    let surface = &fit.selection.fit.surface;
    io::write_surface_csv(surface, &out(cfg, "surface.csv"))?;
    io::write_json(
        &SurfaceJson::new(surface, fit.selection.bandwidth, opts.kernel),
        &out(cfg, "surface.json"),
    )?;
    io::write_raw_points_csv(&fit.raw.points, &out(cfg, "raw_points.csv"))?;
    write_eigen(cfg, "", &fit.eigen)?;
    io::write_json(&model, &out(cfg, "model.json"))?;

    let mut diagnostics = json!({
        "n_subjects": dataset.n_subjects(),
        "n_observations": dataset.n_observations(),
        "domain": [dataset.domain().lower(), dataset.domain().upper()],
        "grid_size": opts.grid_size,
        "kernel": opts.kernel,
        "h_prime": fit.h_prime,
        "bandwidth": fit.selection.bandwidth,
        "mean_bandwidth": mean.bandwidth,
        "dropped_comparisons": fit.raw.dropped_comparisons,
        "retained_comparisons": fit.raw.retained_comparisons,
        "retained_fraction": fit.raw.retained_fraction,
        "n_raw_points": fit.raw.points.len(),
        "local_constant_nodes": fit.selection.fit.local_constant_nodes.len(),
        "gcv": fit.selection.trace,
        "mean_gcv": mean.trace,
        "eigenvalues": fit.eigen.eigenvalues,
        "rank_deficient": fit.eigen.rank_deficient,
    });
    if cfg.fit.baseline {
        let base = fit_baseline(&dataset, &opts)?;
        let base_model = baseline_model(&base, opts.n_components)?;
        io::write_surface_csv(&base.selection.fit.surface, &out(cfg, "baseline_surface.csv"))?;
        write_eigen(cfg, "baseline_", &base.eigen)?;
        io::write_json(&base_model, &out(cfg, "baseline_model.json"))?;
        diagnostics["baseline"] = json!({
            "bandwidth": base.selection.bandwidth,
            "n_raw_points": base.raw_points.len(),
            "local_constant_nodes": base.selection.fit.local_constant_nodes.len(),
            "gcv": base.selection.trace,
            "eigenvalues": base.eigen.eigenvalues,
        });
    }
    io::write_json(&diagnostics, &out(cfg, "diagnostics.json"))
}

fn scores_and_predictions(model: &FittedModel, dataset: &Dataset) -> Result<(Vec<ScoreEstimate>, Vec<Prediction>)> {
    let mut scores = Vec::with_capacity(dataset.n_subjects());
    let mut predictions = Vec::new();
    for sample in dataset.samples() {
        let est = estimate_scores(model, sample)?;
        if est.usable {
            let fitted = predict_trajectory(model, &est, sample.times())?;
            predictions.extend(sample.times().iter().zip(fitted).map(|(&time, predicted)| Prediction {
                subject_id: sample.subject_id().into(),
                time,
                predicted,
            }));
        }
        scores.push(est);
    }
    Ok((scores, predictions))
}

fn load_model(path: &Path, truncation: usize) -> Result<FittedModel> {
    let model: FittedModel = io::read_json(path)?;
    model.validate()?;
    if truncation > model.eigen.n_components() {
        return Err(Error::Usage(format!(
            "L = {truncation} exceeds the {} components stored in {}",
            model.eigen.n_components(),
            path.display()
        )));
    }
    Ok(model.with_truncation(truncation)?)
}

/// Writes `scores.csv`, `predictions.csv` and `mse.json`.
///
/// With a split the model is refit on the training subjects and the MSE is
/// reported for both parts; otherwise the stored model is applied to every
/// subject.
pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let dataset = read_input(cfg)?;
    let l = cfg.predict.truncation;
    let method = if cfg.fit.baseline {
        Method::Baseline
    } else {
        Method::Kfpca
    };
    let (model, mse) = match cfg.predict.split {
        Some(fraction) => {
            let (train, test) = train_test_split(&dataset, fraction, cfg.predict.split_seed)?;
            let model = fit_model(&train, &cfg.fit_options(), method, l)?;
            let mse = json!({
                "method": method,
                "truncation": l,
                "split": fraction,
                "split_seed": cfg.predict.split_seed,
                "train_subjects": train.samples().iter().map(|s| s.subject_id()).collect::<Vec<_>>(),
                "test_subjects": test.samples().iter().map(|s| s.subject_id()).collect::<Vec<_>>(),
                "train": prediction_mse(&model, &train)?,
                "test": prediction_mse(&model, &test)?,
            });
            (model, mse)
        }
        None => {
            let path = cfg
                .predict
                .model
                .as_deref()
                .ok_or_else(|| Error::Usage("predict needs --model or --split".into()))?;
            let model = load_model(path, l)?;
            let mse = json!({ "truncation": l, "all": prediction_mse(&model, &dataset)? });
            (model, mse)
        }
    };
    let (scores, predictions) = scores_and_predictions(&model, &dataset)?;
    io::write_scores_csv(&scores, l, &out(cfg, "scores.csv"))?;
    io::write_predictions_csv(&predictions, &out(cfg, "predictions.csv"))?;
    io::write_json(&mse, &out(cfg, "mse.json"))
}

/// Writes `runs.csv`, `aggregate.csv` and `report.json`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<()> {
    let specs = cfg.bench_specs();
    let reports = run_cells(&specs, &cfg.fit_options(), cfg.jobs)?;
    io::write_runs_csv(&reports, &out(cfg, "runs.csv"))?;
    io::write_aggregate_csv(&reports, &out(cfg, "aggregate.csv"))?;
    io::write_json(&reports, &out(cfg, "report.json"))
}

/// Writes `population.json` and `population.csv`.
pub fn cmd_verify_population(cfg: &RunConfig, case: Option<Case>) -> Result<()> {
    let case = case.unwrap_or(cfg.simulation.case);
    let dists = cfg
        .population
        .distributions
        .clone()
        .unwrap_or_else(|| ScoreDistribution::ALL.to_vec());
    let rows = verify_population(
        case,
        &dists,
        cfg.simulation.eigenvalues,
        cfg.population.n_pairs,
        cfg.grid,
        cfg.seed,
        cfg.jobs,
    )?;
    let path = out(cfg, "population.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path.display().to_string(), e))?;
    let header = [
        "case",
        "distribution",
        "n_pairs",
        "eigenvalue1",
        "eigenvalue2",
        "angle1",
        "angle2",
        "order_preserved",
        "low_confidence",
    ];
    w.write_record(header).map_err(|e| Error::format("population.csv", e))?;
    for row in &rows {
        w.write_record([
            row.case.to_string(),
            row.distribution.to_string(),
            row.n_pairs.to_string(),
            row.eigenvalues[0].to_string(),
            row.eigenvalues[1].to_string(),
            row.angle1.to_string(),
            row.angle2.to_string(),
            row.order_preserved.to_string(),
            row.low_confidence.to_string(),
        ])
        .map_err(|e| Error::format("population.csv", e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    io::write_json(&rows, &out(cfg, "population.json"))?;
    Ok(())
}
