use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

/// Top-two principal axes of a point cloud and the projected coordinates.
#[derive(Debug, Clone)]
pub struct Pca2d {
    pub mean: Vec<f64>,
    /// Unit, orthogonal; each has its largest-magnitude coordinate positive.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    /// `N x 2` coordinates of the centered rows.
    pub projection: Matrix,
}

pub fn pca_project_2d(emb: &Matrix) -> Result<Pca2d> {
    let (n, d) = emb.shape();
    if n < 3 || d < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs N >= 3 and D >= 2, got {n}x{d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in emb.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, j| emb.get(i, j) - mean[j]);
    let scale = emb.max_abs().max(1.0);
    if centered.iter().all(|v| v.abs() <= 1e-12 * scale) {
        return Err(Error::RankZero);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let component = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let mut projection = Matrix::zeros(n, 2);
    for i in 0..n {
        let row: Vec<f64> = centered.row(i).iter().copied().collect();
        projection.set(i, 0, dot(&row, &components[0]));
        projection.set(i, 1, dot(&row, &components[1]));
    }
    Ok(Pca2d {
        mean,
        components,
        explained_variance: [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)],
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn planar_data_reconstructs_exactly() {
        let mut rng = crate::rng::seeded_rng(1);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.random_range(-3.0..3.0), 0.0, rng.random_range(-1.0..1.0), 0.0, 0.0])
            .collect();
        let emb = Matrix::from_rows(&rows).unwrap();
        let p = pca_project_2d(&emb).unwrap();
        for (i, r) in rows.iter().enumerate() {
            for (j, rj) in r.iter().enumerate() {
                let rec = p.mean[j]
                    + p.projection.get(i, 0) * p.components[0][j]
                    + p.projection.get(i, 1) * p.components[1][j];
                assert!((rec - rj).abs() < 1e-9);
            }
        }
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-12);
    }

    #[test]
    fn variance_ordering() {
        let mut rng = crate::rng::seeded_rng(2);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let p = pca_project_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }

    #[test]
    fn identical_points_are_rank_zero() {
        let emb = Matrix::from_rows(&[[1.0, 2.0]; 4]).unwrap();
        assert!(matches!(pca_project_2d(&emb), Err(Error::RankZero)));
        assert!(pca_project_2d(&Matrix::zeros(2, 3)).is_err());
    }
}
