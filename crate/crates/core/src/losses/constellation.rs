use super::{check_index, LossResult};
use crate::batching::ConstellationBatch;
use crate::error::{Error, Result};
use crate::numerics::{dot, log1p_sum_exp_with_weights, Matrix};

/// Constellation loss over anchor/positive/K-negative tuples.
///
/// `1/N * sum_i log(1 + sum_{j=1..K} exp(a_i . n_ij - a_i . p_i))`, with `N` the
/// number of anchor-positive entries. Gradients accumulate per embedding row
/// across every tuple that references it.
pub fn constellation_loss(batch: &ConstellationBatch, x: &Matrix, k: usize) -> Result<LossResult> {
    if batch.is_empty() {
        return Err(Error::InsufficientData(
            "constellation batch has no anchor-positive entries".into(),
        ));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut sum = 0.0;
    let mut z = Vec::with_capacity(k);
    for (idx, entry) in batch.iter().enumerate() {
        if entry.negatives.len() != k {
            return Err(Error::MalformedKplet {
                entry: idx,
                expected: k,
                got: entry.negatives.len(),
            });
        }
        check_index(entry.anchor, x.rows())?;
        check_index(entry.positive, x.rows())?;
        for &n in &entry.negatives {
            check_index(n, x.rows())?;
        }
        let a = x.row(entry.anchor);
        let p = x.row(entry.positive);
        let own = dot(a, p);
        z.clear();
        z.extend(entry.negatives.iter().map(|&n| dot(a, x.row(n)) - own));
        let (value, weights) = log1p_sum_exp_with_weights(&z);
        sum += value;
        let mut total = 0.0;
        for (&n, &w) in entry.negatives.iter().zip(&weights) {
            let neg = x.row(n);
            grad.add_scaled_to_row(entry.anchor, scale * w, neg);
            grad.add_scaled_to_row(n, scale * w, a);
            total += w;
        }
        grad.add_scaled_to_row(entry.anchor, -scale * total, p);
        grad.add_scaled_to_row(entry.positive, -scale * total, a);
    }
    Ok(LossResult {
        value: scale * sum,
        grad,
    })
}
