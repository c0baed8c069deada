//! Raw Kendall covariances against a direct, loop-by-loop transcription of
//! their definition on small random instances.

use kfpca_core::{raw_kendall, Dataset, Domain, Kernel, SparseSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Kernel-weighted average of the donor at `t`, absent without coverage.
fn donor_value(times: &[f64], values: &[f64], t: f64, h: f64) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for q in 0..times.len() {
        let w = epanechnikov((t - times[q]) / h) / h;
        num += w * values[q];
        den += w;
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

struct Expected {
    /// `(subject, s, t, value)` in emission order.
    points: Vec<(usize, f64, f64, f64)>,
    dropped: usize,
}

fn oracle(subjects: &[(Vec<f64>, Vec<f64>)], h: f64) -> Expected {
    let n = subjects.len();
    let mut points = Vec::new();
    let mut dropped = 0;
    for i in 0..n {
        let (ti, yi) = &subjects[i];
        let m = ti.len();
        if m < 2 {
            continue;
        }
        let mut terms: Vec<Vec<Vec<f64>>> = Vec::new();
        for j in 0..n {
            if j == i {
                continue;
            }
            let (tj, yj) = &subjects[j];
            let mut xhat = Vec::new();
            for q in 0..m {
                xhat.push(donor_value(tj, yj, ti[q], h));
            }
            if xhat.iter().any(|x| x.is_none()) {
                dropped += 1;
                continue;
            }
            let mut d = 0.0;
            for q in 0..m {
                let r = yi[q] - xhat[q].unwrap();
                d += r * r;
            }
            d /= m as f64;
            if d < 1e-12 {
                dropped += 1;
                continue;
            }
            let mut term = vec![vec![0.0; m]; m];
            for k in 0..m {
                for l in 0..m {
                    let rk = yi[k] - xhat[k].unwrap();
                    let rl = yi[l] - xhat[l].unwrap();
                    term[k][l] = rk * rl / d;
                }
            }
            terms.push(term);
        }
        if terms.is_empty() {
            continue;
        }
        for k in 0..m {
            for l in 0..m {
                if k == l {
                    continue;
                }
                let sum: f64 = terms.iter().map(|t| t[k][l]).sum();
                points.push((i, ti[k], ti[l], sum / terms.len() as f64));
            }
        }
    }
    Expected { points, dropped }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<(Vec<f64>, Vec<f64>)>, f64) {
    let n = rng.random_range(2..=5);
    let subjects = (0..n)
        .map(|_| {
            let m = rng.random_range(1..=4);
            let mut times: Vec<f64> = Vec::new();
            while times.len() < m {
                let t = (rng.random::<f64>() * 10.0 * 64.0).round() / 64.0;
                if !times.contains(&t) {
                    times.push(t);
                }
            }
            times.sort_by(f64::total_cmp);
            let values = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            (times, values)
        })
        .collect();
    (subjects, rng.random_range(0.3..8.0))
}

#[test]
fn matches_direct_transcription_on_random_small_instances() {
    let mut compared = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (subjects, h) = random_instance(&mut rng);
        let samples = subjects
            .iter()
            .enumerate()
            .map(|(i, (t, y))| SparseSample::new(format!("s{i}"), t.clone(), y.clone()).unwrap())
            .collect();
        let ds = Dataset::new(Domain::new(0.0, 10.0).unwrap(), samples).unwrap();
        let want = oracle(&subjects, h);
        match raw_kendall(&ds, h, Kernel::Epanechnikov) {
            Ok(got) => {
                assert_eq!(got.dropped_comparisons, want.dropped, "seed {seed}");
                assert_eq!(got.points.len(), want.points.len(), "seed {seed}");
                for (p, &(i, s, t, v)) in got.points.iter().zip(&want.points) {
                    assert_eq!(p.subject_index, i, "seed {seed}");
                    assert_eq!((p.s, p.t), (s, t), "seed {seed}");
                    assert!((p.value - v).abs() <= 1e-12, "seed {seed}: {} vs {v}", p.value);
                }
                compared += got.points.len();
            }
            Err(e) => {
                // every comparison dropped while some subject was eligible
                assert!(e.is_numerical(), "seed {seed}: {e}");
                assert!(want.points.is_empty(), "seed {seed}");
            }
        }
    }
    assert!(compared > 100);
}

#[test]
fn hand_example() {
    let a = SparseSample::new("a", vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
    let b = SparseSample::new("b", vec![0.0, 1.0], vec![2.0, 1.0]).unwrap();
    let ds = Dataset::new(Domain::new(0.0, 1.0).unwrap(), vec![a, b]).unwrap();
    let got = raw_kendall(&ds, 0.5, Kernel::Epanechnikov).unwrap();
    let want = oracle(
        &[(vec![0.0, 1.0], vec![1.0, 3.0]), (vec![0.0, 1.0], vec![2.0, 1.0])],
        0.5,
    );
    assert!((got.points[0].value + 0.8).abs() < 1e-15);
    assert!((want.points[0].3 + 0.8).abs() < 1e-15);
}
