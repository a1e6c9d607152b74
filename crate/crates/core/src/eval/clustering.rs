use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{euclidean, Matrix};

fn groups(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut g: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        g.entry(l).or_default().push(i);
    }
    g
}

fn check_labels(emb: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != emb.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", emb.rows()),
            got: format!("{}", labels.len()),
        });
    }
    Ok(())
}

/// Davies-Bouldin index with Euclidean scatter (mean distance to centroid)
/// and centroid separation. Lower is better.
pub fn davies_bouldin(emb: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(emb, labels)?;
    let groups = groups(labels);
    if groups.len() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = emb.cols();
    let ids: Vec<usize> = groups.keys().copied().collect();
    let mut centroids = Vec::with_capacity(groups.len());
    let mut scatter = Vec::with_capacity(groups.len());
    for rows in groups.values() {
        let mut c = vec![0.0; dim];
        for &r in rows {
            for (cv, v) in c.iter_mut().zip(emb.row(r)) {
                *cv += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= rows.len() as f64);
        let s = rows.iter().map(|&r| euclidean(emb.row(r), &c)).sum::<f64>() / rows.len() as f64;
        centroids.push(c);
        scatter.push(s);
    }
    let mut total = 0.0;
    for i in 0..centroids.len() {
        let mut worst = 0.0_f64;
        for j in 0..centroids.len() {
            if i == j {
                continue;
            }
            let d = euclidean(&centroids[i], &centroids[j]);
            if d < 1e-12 {
                return Err(Error::DegenerateCentroids(ids[i], ids[j]));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / centroids.len() as f64)
}

/// Mean silhouette coefficient with Euclidean distances.
///
/// Points in singleton clusters score 0, as do points whose `a` and `b` are
/// both zero.
pub fn silhouette(emb: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(emb, labels)?;
    let groups = groups(labels);
    if groups.len() < 2 {
        return Err(Error::SingleClass);
    }
    let n = emb.rows();
    let mut total = 0.0;
    let mut sums = BTreeMap::new();
    for i in 0..n {
        sums.clear();
        for (j, &l) in labels.iter().enumerate() {
            if j != i {
                *sums.entry(l).or_insert(0.0) += euclidean(emb.row(i), emb.row(j));
            }
        }
        let own = labels[i];
        let own_size = groups[&own].len();
        if own_size == 1 {
            continue;
        }
        let a = sums.get(&own).copied().unwrap_or(0.0) / (own_size - 1) as f64;
        let b = groups
            .iter()
            .filter(|(&c, _)| c != own)
            .map(|(c, rows)| sums[c] / rows.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
