//! Finite-sample kernel estimators for the fairness penalties.
//!
//! Both estimators use the RBF kernel `k(x, y) = exp(-||x - y||^2 / (2 s^2))`.
//! The bandwidth `s` comes from the median heuristic (median of pairwise
//! Euclidean distances) unless the caller fixes it; gradients treat the
//! bandwidth as a constant, which is why training resolves it once per batch
//! before differentiating.
//!
//! - [`hsic`]: biased Hilbert-Schmidt independence criterion between feature
//!   rows and group labels, `trace(K H L H) / (n - 1)^2` with a linear kernel
//!   on group one-hots (so `L[i][j] = 1` iff the groups match).
//! - [`mmd2`]: biased squared maximum mean discrepancy between two samples,
//!   `mean K(A,A) + mean K(B,B) - 2 mean K(A,B)`.
//!
//! Matrices are flat row-major `n x dim` slices throughout.

use crate::error::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row(data: &[f64], dim: usize, i: usize) -> &[f64] {
    &data[i * dim..(i + 1) * dim]
}

/// Median of pairwise Euclidean distances; falls back to 1 when the points
/// coincide (the kernel is constant there anyway).
pub fn median_bandwidth(data: &[f64], n: usize, dim: usize) -> f64 {
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(sq_dist(row(data, dim, i), row(data, dim, j)).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dists[dists.len() / 2];
    if median > 1e-12 {
        median
    } else {
        1.0
    }
}

fn rbf_gram(data: &[f64], n: usize, dim: usize, sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let k = (-sq_dist(row(data, dim, i), row(data, dim, j)) * inv).exp();
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    gram
}

/// Doubly centered group-match matrix `H L H` with `L[i][j] = 1(a_i == a_j)`.
fn centered_group_kernel(groups: &[usize]) -> Vec<f64> {
    let n = groups.len();
    let nf = n as f64;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            l[i * n + j] = if groups[i] == groups[j] { 1.0 } else { 0.0 };
        }
    }
    let row_means: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| l[i * n + j]).sum::<f64>() / nf)
        .collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = l[i * n + j] - row_means[i] - row_means[j] + grand;
        }
    }
    m
}

/// Biased HSIC estimate between feature rows and group labels, with the
/// median-heuristic bandwidth. Requires at least 4 rows.
pub fn hsic(features: &[f64], n: usize, dim: usize, groups: &[usize]) -> Result<f64> {
    let sigma = median_bandwidth(features, n, dim);
    hsic_with_bandwidth(features, n, dim, groups, sigma).map(|(v, _)| v)
}

/// Biased HSIC estimate and its gradient with respect to the features, at a
/// fixed bandwidth.
pub fn hsic_with_bandwidth(
    features: &[f64],
    n: usize,
    dim: usize,
    groups: &[usize],
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "hsic requires at least 4 rows, got {n}"
        )));
    }
    if features.len() != n * dim || groups.len() != n {
        return Err(Error::DimensionMismatch {
            what: "hsic inputs",
            expected: n * dim,
            got: features.len(),
        });
    }
    let gram = rbf_gram(features, n, dim, sigma);
    let m = centered_group_kernel(groups);
    let scale = 1.0 / ((n as f64 - 1.0) * (n as f64 - 1.0));

    let mut value = 0.0;
    for i in 0..n * n {
        value += gram[i] * m[i];
    }
    value *= scale;

    // d k(f_i, f_j) / d f_i = k * (f_j - f_i) / sigma^2, so each point picks
    // up 2 * scale * sum_j M_ij K_ij (f_j - f_i) / sigma^2.
    let inv_sq = 1.0 / (sigma * sigma);
    let mut grad = vec![0.0; n * dim];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let coeff = 2.0 * scale * m[i * n + j] * gram[i * n + j] * inv_sq;
            if coeff == 0.0 {
                continue;
            }
            let fi = i * dim;
            let fj = j * dim;
            for t in 0..dim {
                grad[fi + t] += coeff * (features[fj + t] - features[fi + t]);
            }
        }
    }
    Ok((value, grad))
}

/// Biased squared MMD between samples `a` (`na x dim`) and `b` (`nb x dim`)
/// at a fixed bandwidth.
pub fn mmd2(a: &[f64], na: usize, b: &[f64], nb: usize, dim: usize, sigma: f64) -> Result<f64> {
    mmd2_with_grad_a(a, na, b, nb, dim, sigma).map(|(v, _)| v)
}

/// Biased squared MMD and its gradient with respect to the first sample.
///
/// The second sample is treated as constant (it holds frozen teacher
/// features in the distillation penalty).
pub fn mmd2_with_grad_a(
    a: &[f64],
    na: usize,
    b: &[f64],
    nb: usize,
    dim: usize,
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    if na == 0 || nb == 0 {
        return Err(Error::EmptyInput("mmd2 requires non-empty samples"));
    }
    if a.len() != na * dim || b.len() != nb * dim {
        return Err(Error::DimensionMismatch {
            what: "mmd2 inputs",
            expected: na * dim,
            got: a.len(),
        });
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let inv_sq = 1.0 / (sigma * sigma);
    let naf = na as f64;
    let nbf = nb as f64;

    let mut grad = vec![0.0; na * dim];

    let mut kaa = 0.0;
    for i in 0..na {
        kaa += 1.0; // diagonal
        for j in (i + 1)..na {
            let k = (-sq_dist(row(a, dim, i), row(a, dim, j)) * inv).exp();
            kaa += 2.0 * k;
            let coeff = 2.0 * k * inv_sq / (naf * naf);
            for t in 0..dim {
                let diff = a[j * dim + t] - a[i * dim + t];
                grad[i * dim + t] += coeff * diff;
                grad[j * dim + t] -= coeff * diff;
            }
        }
    }
    let mut kbb = 0.0;
    for i in 0..nb {
        kbb += 1.0;
        for j in (i + 1)..nb {
            kbb += 2.0 * (-sq_dist(row(b, dim, i), row(b, dim, j)) * inv).exp();
        }
    }
    let mut kab = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let k = (-sq_dist(row(a, dim, i), row(b, dim, j)) * inv).exp();
            kab += k;
            let coeff = -2.0 * k * inv_sq / (naf * nbf);
            for t in 0..dim {
                grad[i * dim + t] += coeff * (b[j * dim + t] - a[i * dim + t]);
            }
        }
    }

    let value = kaa / (naf * naf) + kbb / (nbf * nbf) - 2.0 * kab / (naf * nbf);
    Ok((value, grad))
}
