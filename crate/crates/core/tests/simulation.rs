use kfpca_core::simulation::*;
use kfpca_core::{angle, eigendecompose, FitOptions, Grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let var = c(2);
    (mean, var, c(3) / var.powf(1.5), c(4) / (var * var) - 3.0)
}

#[test]
fn score_laws_meet_their_moment_contracts() {
    let lambda = 9.0;
    for (k, dist) in ScoreDistribution::ALL.into_iter().enumerate() {
        let mut rng = substream(2024, k as u64);
        let x = draw_scores(dist, lambda, 1_000_000, &mut rng).unwrap();
        let (mean, var, skew, kurt) = moments(&x);
        let se = (var / x.len() as f64).sqrt();
        assert!(mean.abs() <= 5.0 * se, "{dist}: mean {mean}");
        let tol = match dist {
            ScoreDistribution::Gaussian | ScoreDistribution::MixGaussian => 0.05,
            _ => 0.10,
        };
        assert!((var / lambda - 1.0).abs() <= tol, "{dist}: variance {var}");
        match dist {
            ScoreDistribution::SkewT => assert!(skew > 0.0, "skewness {skew}"),
            ScoreDistribution::Ec2 => assert!(kurt > 0.0, "excess kurtosis {kurt}"),
            _ => {}
        }
    }
}

#[test]
fn oracle_error_shrinks_with_more_pairs() {
    let grid = Grid::new(simulation_domain(), 31).unwrap();
    let truth = true_eigenfunctions(Case::One, &grid).unwrap();
    let median_angle = |n_pairs: usize| {
        let mut angles: Vec<f64> = (0..10u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let surface =
                    population_kendall_oracle(Case::One, ScoreDistribution::Gaussian, n_pairs, &grid, &mut rng)
                        .unwrap();
                let es = eigendecompose(&surface, 2).unwrap();
                angle(&truth.0, &es.eigenfunctions[0]).unwrap()
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        0.5 * (angles[4] + angles[5])
    };
    let (a, b) = (median_angle(200), median_angle(400));
    assert!(b < a, "median angle {a} with 200 pairs, {b} with 400");
}

#[test]
fn aggregates_are_means_of_runs() {
    let mut spec = SimulationSpec::new(Case::Two, ScoreDistribution::MixGaussian, Design::Dense, 5);
    spec.n_runs = 4;
    spec.n_subjects = 30;
    let opts = FitOptions {
        grid_size: 21,
        ..FitOptions::default()
    };
    let report = run_benchmark(&spec, &opts).unwrap();
    assert_eq!(report.n_completed + report.n_excluded, 4);
    let summary = report.kfpca.unwrap();
    let n = report.runs.len() as f64;
    for k in 0..4 {
        let mean: f64 = report.runs.iter().map(|r| r.kfpca.to_array()[k]).sum::<f64>() / n;
        assert!((summary.mean.to_array()[k] - mean).abs() <= 1e-12);
    }
}
