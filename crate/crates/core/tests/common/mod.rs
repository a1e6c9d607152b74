//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use metric_embed::batching::MiningMode;
use metric_embed::Matrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sqd(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Matrix {
    Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Labels with every one of `classes` classes present, shuffled.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < classes { i } else { rng.random_range(0..classes) })
        .collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels
}

/// Brute-force O(n^3) enumeration of triplets satisfying the mode.
pub fn brute_force_triplets(
    x: &Matrix,
    labels: &[usize],
    alpha: f64,
    mode: MiningMode,
) -> BTreeSet<(usize, usize, usize)> {
    let n = labels.len();
    let mut out = BTreeSet::new();
    for a in 0..n {
        for p in 0..n {
            for q in 0..n {
                if a == p || labels[a] != labels[p] || labels[q] == labels[a] {
                    continue;
                }
                let dap = sqd(x.row(a), x.row(p));
                let dan = sqd(x.row(a), x.row(q));
                let keep = match mode {
                    MiningMode::Hard => dan < dap,
                    MiningMode::SemiHard => dap <= dan && dan < dap + alpha,
                    MiningMode::AllValid => dap - dan + alpha > 0.0,
                };
                if keep {
                    out.insert((a, p, q));
                }
            }
        }
    }
    out
}

fn class_ids(labels: &[usize]) -> Vec<usize> {
    labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn davies_bouldin_oracle(x: &Matrix, labels: &[usize]) -> f64 {
    let ids = class_ids(labels);
    let members: Vec<Vec<&[f64]>> = ids
        .iter()
        .map(|&c| {
            (0..labels.len())
                .filter(|&i| labels[i] == c)
                .map(|i| x.row(i))
                .collect()
        })
        .collect();
    let centroids: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            (0..x.cols())
                .map(|j| m.iter().map(|r| r[j]).sum::<f64>() / m.len() as f64)
                .collect()
        })
        .collect();
    let scatter: Vec<f64> = members
        .iter()
        .zip(&centroids)
        .map(|(m, c)| m.iter().map(|r| dist(r, c)).sum::<f64>() / m.len() as f64)
        .collect();
    let k = ids.len();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (scatter[i] + scatter[j]) / dist(&centroids[i], &centroids[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

pub fn silhouette_oracle(x: &Matrix, labels: &[usize]) -> f64 {
    let n = labels.len();
    let ids = class_ids(labels);
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |c: usize| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == c).collect();
            others.iter().map(|&j| dist(x.row(i), x.row(j))).sum::<f64>() / others.len() as f64
        };
        if labels.iter().filter(|&&l| l == labels[i]).count() == 1 {
            continue;
        }
        let a = mean_to(labels[i]);
        let b = ids
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| mean_to(c))
            .fold(f64::INFINITY, f64::min);
        let s = if a.max(b) == 0.0 { 0.0 } else { (b - a) / a.max(b) };
        total += s;
    }
    total / n as f64
}

/// k-NN by full sort on (distance, index); vote ties to the smallest class.
pub fn knn_oracle(train: &Matrix, labels: &[usize], query: &[f64], k: usize, skip: Option<usize>) -> usize {
    let mut all: Vec<(f64, usize)> = (0..train.rows())
        .filter(|&i| Some(i) != skip)
        .map(|i| (sqd(train.row(i), query), i))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut counts = vec![0; n_classes];
    for &(_, i) in &all[..k] {
        counts[labels[i]] += 1;
    }
    let best = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == best).unwrap()
}

/// Top two principal directions by power iteration with deflation.
pub fn pca_power_iteration(x: &Matrix) -> ([Vec<f64>; 2], [f64; 2]) {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b]) / (n as f64 - 1.0);
            }
        }
    }
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    let mut vals = [0.0; 2];
    for (slot, val) in vals.iter_mut().enumerate() {
        let mut v: Vec<f64> = (0..d).map(|j| 1.0 + j as f64 * 0.37 + slot as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let mut w: Vec<f64> = (0..d).map(|a| (0..d).map(|b| cov[a][b] * v[b]).sum()).collect();
            for u in &vecs {
                let p: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            lambda = norm;
            v = w.into_iter().map(|a| a / norm).collect();
        }
        let pivot = (0..d).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        *val = lambda;
        vecs.push(v);
    }
    ([vecs[0].clone(), vecs[1].clone()], vals)
}
