//! Dense row-major matrices and the scalar kernels shared by losses and metrics.
//!
//! All arithmetic is `f64` and every reduction runs in a fixed, sequential
//! order so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm floor used by [`l2_normalize_rows`].
pub const NORM_FLOOR: f64 = 1e-12;

/// Row-major `rows x cols` matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    /// Builds a matrix, rejecting a wrong data length or any NaN/Inf entry.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeData {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected: format!("row of width {cols}"),
                    got: format!("row {i} of width {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", self.cols),
                got: format!("{} columns", other.cols),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-width matrix still has `rows` empty rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    /// Adds `scale * v` to row `i`.
    pub fn add_scaled_to_row(&mut self, i: usize, scale: f64, v: &[f64]) {
        for (dst, src) in self.row_mut(i).iter_mut().zip(v) {
            *dst += scale * src;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// `G[i][j] = <x_i, x_j>`.
pub fn gram_matrix(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(x.row(i), x.row(j));
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

/// `D[i][j] = ||x_i - x_j||^2`, evaluated by direct differences.
///
/// The result is exactly symmetric with a zero diagonal; negative values
/// cannot arise from this formula but are clamped anyway.
pub fn pairwise_sq_dists(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_dist(x.row(i), x.row(j)).max(0.0);
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// `log(1 + sum_j exp(z_j))`, computed as a shifted log-sum-exp over `{0} ∪ z`.
///
/// An empty `z` gives `log 1 = 0`.
pub fn log1p_sum_exp(z: &[f64]) -> f64 {
    let shift = z.iter().fold(0.0_f64, |m, &v| m.max(v));
    let mut acc = (-shift).exp();
    for &v in z {
        acc += (v - shift).exp();
    }
    shift + acc.ln()
}

/// Like [`log1p_sum_exp`], also returning `d/dz_j`, i.e. the softmax weight
/// of each `z_j` against the implicit zero term.
pub fn log1p_sum_exp_with_weights(z: &[f64]) -> (f64, Vec<f64>) {
    let shift = z.iter().fold(0.0_f64, |m, &v| m.max(v));
    let exps: Vec<f64> = z.iter().map(|&v| (v - shift).exp()).collect();
    let total = (-shift).exp() + exps.iter().sum::<f64>();
    let weights = exps.iter().map(|e| e / total).collect();
    (shift + total.ln(), weights)
}

/// Rows scaled to unit L2 norm, with the pre-normalization norms.
#[derive(Debug, Clone)]
pub struct NormalizedRows {
    pub matrix: Matrix,
    /// Original row norms (before flooring).
    pub norms: Vec<f64>,
    /// Rows whose norm fell below [`NORM_FLOOR`] and were divided by the floor.
    pub degenerate: Vec<usize>,
}

pub fn l2_normalize_rows(x: &Matrix) -> NormalizedRows {
    let mut out = x.clone();
    let mut norms = Vec::with_capacity(x.rows());
    let mut degenerate = Vec::new();
    for i in 0..x.rows() {
        let norm = dot(x.row(i), x.row(i)).sqrt();
        norms.push(norm);
        let denom = if norm < NORM_FLOOR {
            degenerate.push(i);
            NORM_FLOOR
        } else {
            norm
        };
        for v in out.row_mut(i) {
            *v /= denom;
        }
    }
    NormalizedRows {
        matrix: out,
        norms,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::seeded_rng(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(Matrix::new(2, 2, vec![0.0; 3]), Err(Error::ShapeData { .. })));
        assert!(matches!(
            Matrix::new(1, 2, vec![0.0, f64::NAN]),
            Err(Error::NonFiniteEntry { row: 0, col: 1 })
        ));
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn gram_of_identity_and_single_row() {
        let eye = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(gram_matrix(&eye), eye);
        let one = Matrix::from_rows(&[[2.0, 0.0]]).unwrap();
        assert_eq!(gram_matrix(&one).as_slice(), &[4.0]);
    }

    #[test]
    fn gram_matches_scalar_loop() {
        let x = random_matrix(5, 3, 1);
        let g = gram_matrix(&x);
        for i in 0..5 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += x.get(i, k) * x.get(j, k);
                }
                assert!((g.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sq_dists_examples() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_sq_dists(&x).as_slice(), &[0.0, 25.0, 25.0, 0.0]);

        let x = random_matrix(6, 4, 2);
        let d = pairwise_sq_dists(&x);
        for i in 0..6 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..6 {
                let mut s = 0.0;
                for k in 0..4 {
                    let diff = x.get(i, k) - x.get(j, k);
                    s += diff * diff;
                }
                assert!((d.get(i, j) - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log1p_sum_exp_examples() {
        assert!((log1p_sum_exp(&[0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log1p_sum_exp(&[1000.0]) - 1000.0).abs() < 1e-12);
        assert_eq!(log1p_sum_exp(&[]), 0.0);
        let naive = (1.0 + (-1f64).exp() + (-2f64).exp() + (-3f64).exp()).ln();
        assert!((log1p_sum_exp(&[-1.0, -2.0, -3.0]) - naive).abs() < 1e-12);
        assert!(log1p_sum_exp(&[-700.0, 700.0]).is_finite());
    }

    #[test]
    fn weights_are_the_gradient() {
        let z = [0.3, -1.2, 2.0];
        let (v, w) = log1p_sum_exp_with_weights(&z);
        assert!((v - log1p_sum_exp(&z)).abs() < 1e-15);
        let h = 1e-6;
        for j in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let fd = (log1p_sum_exp(&zp) - log1p_sum_exp(&zm)) / (2.0 * h);
            assert!((fd - w[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn normalize_examples() {
        let x = Matrix::from_rows(&[[3.0, 4.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let n = l2_normalize_rows(&x);
        assert!((n.matrix.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.matrix.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(n.matrix.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(n.degenerate, vec![2]);

        let x = random_matrix(4, 5, 3);
        let n = l2_normalize_rows(&x);
        for r in n.matrix.iter_rows() {
            assert!((dot(r, r).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    fn matrix_strategy() -> impl Strategy<Value = Matrix> {
        (1usize..7, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c).prop_map(move |d| Matrix::new(r, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn distance_gram_identity(x in matrix_strategy()) {
            let g = gram_matrix(&x);
            let d = pairwise_sq_dists(&x);
            for i in 0..x.rows() {
                for j in 0..x.rows() {
                    let via_gram = g.get(i, i) + g.get(j, j) - 2.0 * g.get(i, j);
                    prop_assert!((d.get(i, j) - via_gram).abs() < 1e-9);
                    prop_assert!(d.get(i, j) >= 0.0);
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                }
            }
        }

        #[test]
        fn log1p_sum_exp_bounds(z in proptest::collection::vec(-700.0f64..700.0, 0..8), j in 0usize..8, bump in 0.0f64..5.0) {
            let v = log1p_sum_exp(&z);
            let max = z.iter().fold(0.0f64, |m, &x| m.max(x));
            prop_assert!(v >= max);
            if !z.is_empty() {
                let mut bumped = z.clone();
                let j = j % z.len();
                bumped[j] += bump;
                prop_assert!(log1p_sum_exp(&bumped) >= v);
            }
        }

        #[test]
        fn normalize_idempotent(x in matrix_strategy()) {
            let once = l2_normalize_rows(&x).matrix;
            let twice = l2_normalize_rows(&once).matrix;
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
