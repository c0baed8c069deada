//! Parallel simulation sweeps and the population eigenfunction check.
//!
//! Work items run on a rayon pool; every item draws from its own substream,
//! so results do not depend on scheduling or on the number of threads.

use kfpca_core::simulation::{
    population_kendall_oracle_scaled, run_single, simulation_domain, substream, true_eigenfunctions, BenchmarkReport,
    Case, ScoreDistribution, SimulationSpec,
};
use kfpca_core::{angle, eigendecompose, FitOptions, Grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oracle runs below this many pairs are flagged as low confidence.
pub const LOW_CONFIDENCE_PAIRS: usize = 1000;

/// Runs `f` on a pool of `jobs` threads (all cores when `None`).
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every replicate of every cell. Failed runs are recorded in the
/// reports and do not stop the sweep.
pub fn run_cells(specs: &[SimulationSpec], options: &FitOptions, jobs: Option<usize>) -> Result<Vec<BenchmarkReport>> {
    for spec in specs {
        spec.validate()?;
    }
    let tasks: Vec<(usize, usize)> = specs
        .iter()
        .enumerate()
        .flat_map(|(c, s)| (0..s.n_runs).map(move |r| (c, r)))
        .collect();
    let outcomes = with_pool(jobs, || {
        tasks
            .par_iter()
            .map(|&(c, r)| (c, r, run_single(&specs[c], options, r)))
            .collect::<Vec<_>>()
    })?;
    let mut per_cell: Vec<Vec<_>> = specs.iter().map(|_| Vec::new()).collect();
    for (c, r, outcome) in outcomes {
        per_cell[c].push((r, outcome));
    }
    Ok(specs
        .iter()
        .zip(per_cell)
        .map(|(spec, outcomes)| BenchmarkReport::from_outcomes(spec.clone(), options.clone(), outcomes))
        .collect())
}

/// Eigenfunctions of the Monte-Carlo population surface for one
/// distribution, compared with the true ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub case: Case,
    pub distribution: ScoreDistribution,
    pub n_pairs: usize,
    pub eigenvalues: [f64; 2],
    pub angle1: f64,
    pub angle2: f64,
    /// The two leading eigenvalues come out in the true order.
    pub order_preserved: bool,
    pub low_confidence: bool,
}

/// Population check for every distribution in `distributions`. Each
/// distribution uses substream `k` of `seed`, `k` its position in
/// [`ScoreDistribution::ALL`].
pub fn verify_population(
    case: Case,
    distributions: &[ScoreDistribution],
    eigenvalues: [f64; 2],
    n_pairs: usize,
    grid_size: usize,
    seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<PopulationRow>> {
    if n_pairs == 0 {
        return Err(Error::Usage("n_pairs must be at least 1".into()));
    }
    let grid = Grid::new(simulation_domain(), grid_size)?;
    let truth = true_eigenfunctions(case, &grid)?;
    let rows = with_pool(jobs, || {
        distributions
            .par_iter()
            .map(|&dist| -> Result<PopulationRow> {
                let stream = ScoreDistribution::ALL.iter().position(|&d| d == dist).unwrap_or(0) as u64;
                let mut rng = substream(seed, stream);
                let surface = population_kendall_oracle_scaled(case, dist, eigenvalues, n_pairs, &grid, 1.0, &mut rng)?;
                let eigen = eigendecompose(&surface, 2)?;
                Ok(PopulationRow {
                    case,
                    distribution: dist,
                    n_pairs,
                    eigenvalues: [eigen.eigenvalues[0], eigen.eigenvalues[1]],
                    angle1: angle(&truth.0, &eigen.eigenfunctions[0])?,
                    angle2: angle(&truth.1, &eigen.eigenfunctions[1])?,
                    order_preserved: (eigen.eigenvalues[0] > eigen.eigenvalues[1]) == (eigenvalues[0] > eigenvalues[1]),
                    low_confidence: n_pairs < LOW_CONFIDENCE_PAIRS,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(rows)
}
