use super::LossResult;
use crate::error::{Error, Result};
use crate::numerics::{dot, log1p_sum_exp_with_weights, Matrix};

/// Multiclass N-pair loss over two aligned arrays.
///
/// Row `i` of `anchors` and of `positives` both belong to class `i`. With
/// `f_i` the anchor and `f_j+` the positive of class `j`:
///
/// `1/N * sum_i log(1 + sum_{j != i} exp(f_i . f_j+ - f_i . f_i+))`
///
/// The gradient is returned as a `2N x D` matrix: anchor rows first, then
/// positive rows.
pub fn npair_loss(anchors: &Matrix, positives: &Matrix) -> Result<LossResult> {
    if anchors.shape() != positives.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", anchors.shape()),
            got: format!("{:?}", positives.shape()),
        });
    }
    let n = anchors.rows();
    if n < 2 {
        return Err(Error::NeedTwoClasses(n));
    }
    let scale = 1.0 / n as f64;
    let mut grad = Matrix::zeros(2 * n, anchors.cols());
    let mut sum = 0.0;
    let mut z = Vec::with_capacity(n - 1);
    for i in 0..n {
        let f = anchors.row(i);
        let own = dot(f, positives.row(i));
        z.clear();
        z.extend((0..n).filter(|&j| j != i).map(|j| dot(f, positives.row(j)) - own));
        let (value, weights) = log1p_sum_exp_with_weights(&z);
        sum += value;
        let others = (0..n).filter(|&j| j != i);
        let mut total = 0.0;
        for (j, w) in others.zip(&weights) {
            // d z_j / d f_i = f_j+ - f_i+
            grad.add_scaled_to_row(i, scale * w, positives.row(j));
            grad.add_scaled_to_row(i, -scale * w, positives.row(i));
            grad.add_scaled_to_row(n + j, scale * w, f);
            total += w;
        }
        grad.add_scaled_to_row(n + i, -scale * total, f);
    }
    Ok(LossResult {
        value: scale * sum,
        grad,
    })
}
