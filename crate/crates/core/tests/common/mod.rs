#![allow(dead_code)]

use hdcp_core::{Dataset, Matrix, RegressionPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    let data = (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_col_major(n, p, data).unwrap()
}

/// Random dataset; with `ties` the change covariate takes few distinct values.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, ties: bool) -> Dataset {
    let x = normal_matrix(rng, n, p);
    let y = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let w = (0..n)
        .map(|_| {
            if ties {
                f64::from(rng.random_range(0..(n as u32 / 3).max(2))) / 10.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    Dataset::new(y, x, w).unwrap()
}

pub fn random_pair(rng: &mut ChaCha8Rng, p: usize) -> RegressionPair {
    let mut v = || (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
    RegressionPair {
        beta: v(),
        gamma: v(),
    }
}

fn rss_rows(data: &Dataset, coef: &[f64], rows: impl Iterator<Item = usize>) -> f64 {
    rows.map(|i| {
        let f: f64 = (0..data.p()).map(|j| data.x().get(i, j) * coef[j]).sum();
        (data.y()[i] - f).powi(2)
    })
    .sum()
}

/// `Q + μ·1[finite]` computed from scratch; `None` is no change.
pub fn brute_objective(data: &Dataset, pair: &RegressionPair, mu: f64, tau: Option<f64>) -> f64 {
    let n = data.n();
    let w = data.w();
    let low = |i: &usize| tau.is_some_and(|t| w[*i] <= t);
    let q = (rss_rows(data, &pair.beta, (0..n).filter(low)) + rss_rows(data, &pair.gamma, (0..n).filter(|i| !low(i))))
        / n as f64;
    q + if tau.is_some() { mu } else { 0.0 }
}

/// Exhaustive minimizer over no change and every observed `w`; ties go to no
/// change, then to the smallest threshold.
pub fn brute_step1(data: &Dataset, pair: &RegressionPair, mu: f64) -> Option<f64> {
    let mut ws = data.w().to_vec();
    ws.sort_by(f64::total_cmp);
    ws.dedup();
    let mut best: (Option<f64>, f64) = (None, brute_objective(data, pair, mu, None));
    let mut best_finite: Option<(f64, f64)> = None;
    for &t in &ws {
        let v = brute_objective(data, pair, mu, Some(t));
        if best_finite.is_none_or(|(_, b)| v < b) {
            best_finite = Some((t, v));
        }
    }
    if let Some((t, v)) = best_finite {
        if v < best.1 {
            best = (Some(t), v);
        }
    }
    best.0
}

fn power_norm_sq(x: &Matrix) -> f64 {
    let mut v = vec![1.0; x.cols()];
    let mut est = 0.0;
    for _ in 0..500 {
        let xv = x.mul_vec(&v);
        let u = x.tr_mul_vec(&xv);
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm / v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = u.iter().map(|a| a / norm).collect();
    }
    est
}

pub fn lasso_objective(x: &Matrix, y: &[f64], n: f64, lambda: f64, beta: &[f64]) -> f64 {
    let f = x.mul_vec(beta);
    let rss: f64 = y.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum();
    rss / n + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Accelerated proximal gradient with function-value restarts.
pub fn fista(x: &Matrix, y: &[f64], n: f64, lambda: f64, max_iter: usize) -> Vec<f64> {
    let p = x.cols();
    let step = 1.0 / (2.0 * power_norm_sq(x) * 1.01 / n).max(1e-300);
    let prox = |z: f64| {
        let t = step * lambda;
        if z > t {
            z - t
        } else if z < -t {
            z + t
        } else {
            0.0
        }
    };
    let mut beta = vec![0.0; p];
    let mut z = beta.clone();
    let mut t = 1.0f64;
    let mut f_prev = lasso_objective(x, y, n, lambda, &beta);
    for _ in 0..max_iter {
        let r: Vec<f64> = x.mul_vec(&z).iter().zip(y).map(|(f, yi)| f - yi).collect();
        let g = x.tr_mul_vec(&r);
        let next: Vec<f64> = (0..p).map(|j| prox(z[j] - step * 2.0 / n * g[j])).collect();
        let f = lasso_objective(x, y, n, lambda, &next);
        if f > f_prev && t > 1.0 {
            // restart momentum from the last iterate
            z = beta.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let moved = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = (0..p).map(|j| next[j] + (t - 1.0) / t_next * (next[j] - beta[j])).collect();
        beta = next;
        t = t_next;
        let scale = 1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let done = moved <= 1e-13 * scale;
        f_prev = f;
        if done {
            break;
        }
    }
    beta
}
