use serde::{Deserialize, Serialize};

use super::{check_index, LossResult};
use crate::error::{Error, Result};
use crate::numerics::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairKind {
    /// Same class (`y = 0`).
    Similar,
    /// Different classes (`y = 1`).
    Dissimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub first: usize,
    pub second: usize,
    pub kind: PairKind,
}

impl ContrastivePair {
    pub fn new(first: usize, second: usize, kind: PairKind) -> Self {
        Self { first, second, kind }
    }
}

/// `1/(2P) * sum[(1-y) d^2 + y max(0, m - d)^2]` over `P` pairs, `d` Euclidean.
///
/// A dissimilar pair at `d = 0` contributes `m^2` to the sum but no gradient.
pub fn contrastive_loss(pairs: &[ContrastivePair], x: &Matrix, margin: f64) -> Result<LossResult> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut diff = vec![0.0; x.cols()];
    let mut sum = 0.0;
    for pair in pairs {
        check_index(pair.first, x.rows())?;
        check_index(pair.second, x.rows())?;
        let (a, b) = (x.row(pair.first), x.row(pair.second));
        for ((d, p), q) in diff.iter_mut().zip(a).zip(b) {
            *d = p - q;
        }
        let d2 = sq_dist(a, b);
        match pair.kind {
            PairKind::Similar => {
                sum += d2;
                grad.add_scaled_to_row(pair.first, scale, &diff);
                grad.add_scaled_to_row(pair.second, -scale, &diff);
            }
            PairKind::Dissimilar => {
                let d = d2.sqrt();
                let gap = margin - d;
                if gap > 0.0 {
                    sum += gap * gap;
                    if d > 0.0 {
                        let coef = -scale * gap / d;
                        grad.add_scaled_to_row(pair.first, coef, &diff);
                        grad.add_scaled_to_row(pair.second, -coef, &diff);
                    }
                }
            }
        }
    }
    Ok(LossResult {
        value: 0.5 * scale * sum,
        grad,
    })
}
