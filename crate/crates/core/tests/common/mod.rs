//! Independent oracles for the property and acceptance tests. Nothing here
//! calls into the code paths being checked.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric positive definite matrix `A Aᵀ / m + ridge·I` with uniform entries.
pub fn random_cov(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> DMatrix<f64> {
    let m = n + 2;
    let a = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut v = (0..m).map(|k| a[(i, k)] * a[(j, k)]).sum::<f64>() / m as f64;
            if i == j {
                v += ridge;
            }
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Uniform point on the simplex (normalized exponentials).
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn quad(m: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += w[i] * m[(i, j)] * w[j];
        }
    }
    total
}

/// Covariance by the definitional double sum over (i, j, t).
pub fn direct_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, n) = x.shape();
    let mean: Vec<f64> = (0..n).map(|j| (0..t).map(|i| x[(i, j)]).sum::<f64>() / t as f64).collect();
    DMatrix::from_fn(n, n, |a, b| {
        (0..t).map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b])).sum::<f64>() / (t - 1) as f64
    })
}

/// Hedging counts by comparing every ordered pair of assets on every day.
pub fn pairwise_hedge_counts(x: &DMatrix<f64>) -> Vec<u64> {
    let (t, n) = x.shape();
    let mean: Vec<f64> = (0..n).map(|j| (0..t).map(|i| x[(i, j)]).sum::<f64>() / t as f64).collect();
    let mut counts = vec![0u64; n];
    for day in 0..t {
        for a in 0..n {
            for b in 0..n {
                if a != b && (x[(day, a)] - mean[a]) * (x[(day, b)] - mean[b]) < 0.0 {
                    counts[a] += 1;
                }
            }
        }
    }
    counts
}

/// Best objective over all subsets of size `k` (`None` = any size).
pub fn brute_force_best_subset(products: &[f64], k: Option<usize>) -> (f64, Vec<usize>) {
    let n = products.len();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 0u32..(1 << n) {
        if k.is_some_and(|k| mask.count_ones() as usize != k) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let value: f64 = members.iter().map(|&i| products[i]).sum();
        if value > best.0 {
            best = (value, members);
        }
    }
    best
}

/// Minimum of `f` over a `step` grid on the simplex in dimension 2 or 3.
pub fn simplex_grid_min(n: usize, step: f64, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let m = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, Vec::new());
    let mut consider = |w: Vec<f64>| {
        let v = f(&w);
        if v < best.0 {
            best = (v, w);
        }
    };
    match n {
        2 => (0..=m).for_each(|i| {
            let a = i as f64 / m as f64;
            consider(vec![a, 1.0 - a]);
        }),
        3 => {
            for i in 0..=m {
                for j in 0..=(m - i) {
                    let (a, b) = (i as f64 / m as f64, j as f64 / m as f64);
                    consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        _ => panic!("grid search supports n = 2 or 3"),
    }
    best
}

/// Minimum of `f` over the simplex intersected with `μᵀw = eps`, in
/// dimension 2 or 3. The feasible set is a point or a segment; it is
/// scanned on a `step` grid in the first coordinate plus its endpoints.
pub fn target_grid_min(mu: &[f64], eps: f64, step: f64, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let n = mu.len();
    let complete = |w0: f64| -> Option<Vec<f64>> {
        match n {
            2 => {
                let w = vec![w0, 1.0 - w0];
                ((mu[0] * w[0] + mu[1] * w[1] - eps).abs() < 1e-12 && w[1] >= -1e-12).then_some(w)
            }
            3 => {
                if (mu[2] - mu[1]).abs() < 1e-15 {
                    return None;
                }
                let w2 = (eps - mu[0] * w0 - mu[1] * (1.0 - w0)) / (mu[2] - mu[1]);
                let w1 = 1.0 - w0 - w2;
                (w1 >= -1e-12 && w2 >= -1e-12).then(|| vec![w0, w1.max(0.0), w2.max(0.0)])
            }
            _ => panic!("grid search supports n = 2 or 3"),
        }
    };
    let mut candidates: Vec<f64> = (0..=((1.0 / step).round() as usize)).map(|i| i as f64 * step).collect();
    match n {
        2 => {
            if (mu[0] - mu[1]).abs() > 1e-15 {
                candidates.push((eps - mu[1]) / (mu[0] - mu[1]));
            }
        }
        _ => {
            // endpoints where the second or third weight reaches zero
            if (mu[0] - mu[2]).abs() > 1e-15 {
                candidates.push((eps - mu[2]) / (mu[0] - mu[2]));
            }
            if (mu[0] - mu[1]).abs() > 1e-15 {
                candidates.push((eps - mu[1]) / (mu[0] - mu[1]));
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    for w0 in candidates.into_iter().filter(|w| (0.0..=1.0).contains(w)) {
        if let Some(w) = complete(w0) {
            let v = f(&w);
            if v < best.0 {
                best = (v, w);
            }
        }
    }
    best
}
