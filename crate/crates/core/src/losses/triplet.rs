use super::{check_index, LossResult};
use crate::batching::TripletIndexSet;
use crate::error::{Error, Result};
use crate::numerics::{sq_dist, Matrix};

/// `1/T * sum max(0, |a-p|^2 - |a-n|^2 + alpha)`.
///
/// The hinge subgradient at exactly zero is taken as zero.
pub fn triplet_loss(triplets: &TripletIndexSet, x: &Matrix, alpha: f64) -> Result<LossResult> {
    if triplets.is_empty() {
        return Err(Error::NoTriplets);
    }
    let scale = 1.0 / triplets.len() as f64;
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut sum = 0.0;
    let dim = x.cols();
    let mut g_anchor = vec![0.0; dim];
    let mut g_pos = vec![0.0; dim];
    let mut g_neg = vec![0.0; dim];
    for t in triplets.iter() {
        for i in [t.anchor, t.positive, t.negative] {
            check_index(i, x.rows())?;
        }
        let (a, p, n) = (x.row(t.anchor), x.row(t.positive), x.row(t.negative));
        let arg = sq_dist(a, p) - sq_dist(a, n) + alpha;
        if arg <= 0.0 {
            continue;
        }
        sum += arg;
        for k in 0..dim {
            g_anchor[k] = 2.0 * (n[k] - p[k]);
            g_pos[k] = -2.0 * (a[k] - p[k]);
            g_neg[k] = 2.0 * (a[k] - n[k]);
        }
        grad.add_scaled_to_row(t.anchor, scale, &g_anchor);
        grad.add_scaled_to_row(t.positive, scale, &g_pos);
        grad.add_scaled_to_row(t.negative, scale, &g_neg);
    }
    Ok(LossResult {
        value: scale * sum,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batching::Triplet;
    use crate::losses::{finite_diff_grad, max_relative_error};

    fn one(a: usize, p: usize, n: usize) -> TripletIndexSet {
        TripletIndexSet::from(vec![Triplet::new(a, p, n)])
    }

    #[test]
    fn easy_triplet_is_zero() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let r = triplet_loss(&one(0, 1, 2), &x, 0.2).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn inactive_hinge_on_a_line() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(triplet_loss(&one(0, 1, 2), &x, 0.2).unwrap().value, 0.0);
    }

    #[test]
    fn active_triplet_value_and_gradient() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [0.5, 0.5], [9.0, 9.0]]).unwrap();
        let set = one(0, 1, 2);
        let r = triplet_loss(&set, &x, 0.2).unwrap();
        assert!((r.value - 0.7).abs() < 1e-12);
        let fd = finite_diff_grad(|m| triplet_loss(&set, m, 0.2).unwrap().value, &x, 1e-5);
        assert!(max_relative_error(&r.grad, &fd) < 1e-6);
        assert_eq!(r.grad.row(3), &[0.0, 0.0]);
    }

    #[test]
    fn empty_set_errors() {
        let x = Matrix::zeros(3, 2);
        let empty = TripletIndexSet::default();
        assert!(matches!(triplet_loss(&empty, &x, 0.2), Err(Error::NoTriplets)));
    }
}
