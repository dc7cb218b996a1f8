//! Two-component PCA for embedding visualization exports.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Convergence tolerance on the iterate change.
const POWER_TOLERANCE: f64 = 1e-8;
const MAX_POWER_ITERATIONS: usize = 10_000;
/// Fixed seed for the power-iteration start vectors; the projection is a
/// pure function of its input.
const POWER_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Project embeddings onto their top two principal components.
///
/// Mean-centers the data, extracts two eigenvectors of the covariance by
/// power iteration with deflation, and fixes each component's sign so its
/// largest-magnitude loading is positive. Errors with fewer than three
/// points.
pub fn pca2(embeddings: &[Embedding]) -> Result<Vec<[f64; 2]>> {
    if embeddings.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "pca2 needs at least 3 points, got {}",
            embeddings.len()
        )));
    }
    let dim = embeddings[0].dim();
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: e.dim(),
            });
        }
    }
    let n = embeddings.len();

    let mut mean = vec![0.0; dim];
    for e in embeddings {
        for (m, &v) in mean.iter_mut().zip(e.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.values().iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // Population covariance (1/n).
    let mut cov = vec![vec![0.0; dim]; dim];
    for row in &centered {
        for i in 0..dim {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..dim {
                cov[i][j] += xi * row[j];
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }

    let (lambda1, c1) = dominant_eigenvector(&cov, POWER_SEED);
    deflate(&mut cov, lambda1, &c1);
    let (_lambda2, c2) = dominant_eigenvector(&cov, POWER_SEED.wrapping_add(1));

    Ok(centered
        .iter()
        .map(|row| [dot(row, &c1), dot(row, &c2)])
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Power iteration on a symmetric PSD matrix. Returns the Rayleigh
/// quotient and the unit eigenvector with its largest-magnitude entry
/// made positive. A (near-)zero matrix yields eigenvalue 0 and the start
/// vector, which projects everything to 0 anyway.
fn dominant_eigenvector(matrix: &[Vec<f64>], seed: u64) -> (f64, Vec<f64>) {
    let dim = matrix.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let start_norm = norm(&v);
    for x in &mut v {
        *x /= start_norm;
    }

    for _ in 0..MAX_POWER_ITERATIONS {
        let mut w: Vec<f64> = matrix.iter().map(|row| dot(row, &v)).collect();
        let w_norm = norm(&w);
        if w_norm < 1e-300 {
            return (0.0, fix_sign(v));
        }
        for x in &mut w {
            *x /= w_norm;
        }
        let change = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = w;
        if change < POWER_TOLERANCE {
            break;
        }
    }
    let mv: Vec<f64> = matrix.iter().map(|row| dot(row, &v)).collect();
    let lambda = dot(&v, &mv);
    (lambda, fix_sign(v))
}

fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut max_idx = 0;
    let mut max_abs = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > max_abs {
            max_abs = x.abs();
            max_idx = i;
        }
    }
    if v[max_idx] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

fn deflate(matrix: &mut [Vec<f64>], lambda: f64, v: &[f64]) {
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry -= lambda * v[i] * v[j];
        }
    }
}
