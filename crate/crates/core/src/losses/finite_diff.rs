//! Central-difference gradients, the independent oracle for every analytic path.

use crate::numerics::Matrix;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// `(L(x + h e_ij) - L(x - h e_ij)) / 2h` for every entry of `x`.
pub fn finite_diff_grad<F>(loss: F, x: &Matrix, h: f64) -> Matrix
where
    F: Fn(&Matrix) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for idx in 0..x.as_slice().len() {
        let orig = x.as_slice()[idx];
        probe.as_mut_slice()[idx] = orig + h;
        let plus = loss(&probe);
        probe.as_mut_slice()[idx] = orig - h;
        let minus = loss(&probe);
        probe.as_mut_slice()[idx] = orig;
        grad.as_mut_slice()[idx] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Largest entrywise disagreement, relative to the larger of the two
/// gradients' max-abs entry (floored at 1e-8 so all-zero pairs compare as 0).
pub fn max_relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    relative_error_slices(analytic.as_slice(), numeric.as_slice())
}

pub(crate) fn relative_error_slices(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient shapes differ");
    let scale = analytic.iter().chain(numeric).fold(1e-8_f64, |m, v| m.max(v.abs()));
    let worst = analytic
        .iter()
        .zip(numeric)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    worst / scale
}
