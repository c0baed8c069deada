//! Small dense symmetric linear algebra.

use alloc::vec;
use alloc::vec::Vec;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// `vectors[k]` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigensolver for a row-major symmetric `n x n` matrix.
///
/// Only the upper triangle is read. Sweeps continue until the off-diagonal
/// mass is negligible relative to the Frobenius norm.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> SymmetricEigen {
    assert_eq!(matrix.len(), n * n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            a[i * n + j] = matrix[i * n + j];
            a[j * n + i] = matrix[i * n + j];
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob: f64 = a.iter().map(|x| x * x).sum();
    if frob > 0.0 {
        let tol = frob * 1e-30;
        for sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let g = 100.0 * apq.abs();
                    if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                        a[p * n + q] = 0.0;
                        a[q * n + p] = 0.0;
                        continue;
                    }
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                    };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    rotate(&mut a, n, p, q, c, s, t);
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    SymmetricEigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect(),
    }
}

#[inline]
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let apq = a[p * n + q];
    let tau = s / (1.0 + c);
    a[p * n + p] -= t * apq;
    a[q * n + q] += t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = akp - s * (akq + tau * akp);
        let new_kq = akq + s * (akp - tau * akq);
        a[k * n + p] = new_kp;
        a[p * n + k] = new_kp;
        a[k * n + q] = new_kq;
        a[q * n + k] = new_kq;
    }
}

/// Minimum-norm least-squares solution of `design * x = rhs`, where
/// `design` is row-major `rows x cols`. Returns the solution and whether the
/// normal matrix was rank deficient.
pub fn least_squares_min_norm(design: &[f64], rows: usize, cols: usize, rhs: &[f64]) -> (Vec<f64>, bool) {
    assert_eq!(design.len(), rows * cols);
    assert_eq!(rhs.len(), rows);
    let mut gram = vec![0.0; cols * cols];
    let mut proj = vec![0.0; cols];
    for r in 0..rows {
        let row = &design[r * cols..(r + 1) * cols];
        for i in 0..cols {
            proj[i] += row[i] * rhs[r];
            for j in 0..cols {
                gram[i * cols + j] += row[i] * row[j];
            }
        }
    }
    let eig = symmetric_eigen(&gram, cols);
    let largest = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = largest * 1e-12;
    let mut rank_deficient = largest == 0.0;
    let mut x = vec![0.0; cols];
    for (lambda, u) in eig.values.iter().zip(&eig.vectors) {
        if *lambda <= cutoff {
            rank_deficient = true;
            continue;
        }
        let coef = u.iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for (xi, ui) in x.iter_mut().zip(u) {
            *xi += coef * ui;
        }
    }
    (x, rank_deficient)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(m: &[f64], n: usize, lambda: f64, u: &[f64]) -> f64 {
        (0..n)
            .map(|i| {
                let mu: f64 = (0..n).map(|j| m[i * n + j] * u[j]).sum();
                (mu - lambda * u[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonalizes_pseudo_random_symmetric_matrices() {
        for &n in &[1usize, 2, 5, 30, 101] {
            let mut m = vec![0.0; n * n];
            let mut state = 12345u64 + n as u64;
            for i in 0..n {
                for j in i..n {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    let x = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
                    m[i * n + j] = x;
                    m[j * n + i] = x;
                }
            }
            let eig = symmetric_eigen(&m, n);
            for w in eig.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
            for (l, u) in eig.values.iter().zip(&eig.vectors) {
                assert!(residual(&m, n, *l, u) < 1e-10);
                let norm: f64 = u.iter().map(|x| x * x).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    let d: f64 = eig.vectors[a].iter().zip(&eig.vectors[b]).map(|(x, y)| x * y).sum();
                    assert!(d.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_matrix_yields_identity_basis() {
        let eig = symmetric_eigen(&[0.0; 9], 3);
        assert_eq!(eig.values, [0.0, 0.0, 0.0]);
        assert_eq!(eig.vectors[0], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn least_squares_exact_and_min_norm() {
        // x = (2, -1)
        let design = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0];
        let rhs = [2.0, 1.0, 0.0];
        let (x, deficient) = least_squares_min_norm(&design, 3, 2, &rhs);
        assert!(!deficient);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);

        // identical columns: minimum norm splits the weight evenly
        let design = [1.0, 1.0, 2.0, 2.0];
        let (x, deficient) = least_squares_min_norm(&design, 2, 2, &[2.0, 4.0]);
        assert!(deficient);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
