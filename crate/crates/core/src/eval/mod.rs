//! Embedding-quality validation: a k-NN shallow classifier, clustering
//! indices, and a 2-D projection for scatter plots.

mod clustering;
mod knn;
mod pca;
mod scores;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::Matrix;

pub use clustering::{davies_bouldin, silhouette};
pub use knn::{knn_classify, knn_classify_loo, DEFAULT_KNN_K};
pub use pca::{pca_project_2d, Pca2d};
pub use scores::{classification_scores, ClassificationScores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub davies_bouldin: f64,
    pub silhouette: f64,
    /// Recall per class id; `None` for classes absent from the test labels.
    pub per_class_recall: Vec<Option<f64>>,
}

/// Fits k-NN on the reference embeddings, scores the test embeddings, and
/// measures cluster quality of the test embeddings.
pub fn evaluate_embeddings(
    train_emb: &Matrix,
    train_labels: &[usize],
    test_emb: &Matrix,
    test_labels: &[usize],
    n_classes: usize,
    k: usize,
) -> Result<EvalReport> {
    let predicted = knn_classify(train_emb, train_labels, test_emb, k)?;
    let scores = classification_scores(&predicted, test_labels, n_classes)?;
    Ok(EvalReport {
        accuracy: scores.accuracy,
        balanced_accuracy: scores.balanced_accuracy,
        davies_bouldin: davies_bouldin(test_emb, test_labels)?,
        silhouette: silhouette(test_emb, test_labels)?,
        per_class_recall: scores.per_class_recall,
    })
}

/// Like [`evaluate_embeddings`] with a single labeled set: each point is
/// classified by its k nearest other points.
pub fn evaluate_embeddings_loo(emb: &Matrix, labels: &[usize], n_classes: usize, k: usize) -> Result<EvalReport> {
    let predicted = knn_classify_loo(emb, labels, k)?;
    let scores = classification_scores(&predicted, labels, n_classes)?;
    Ok(EvalReport {
        accuracy: scores.accuracy,
        balanced_accuracy: scores.balanced_accuracy,
        davies_bouldin: davies_bouldin(emb, labels)?,
        silhouette: silhouette(emb, labels)?,
        per_class_recall: scores.per_class_recall,
    })
}

/// Writes `x,y,label` rows, one per projected point.
pub fn write_scatter_csv<W: Write>(projection: &Matrix, labels: &[String], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["x", "y", "label"])?;
    for (row, label) in projection.iter_rows().zip(labels) {
        w.write_record([row[0].to_string(), row[1].to_string(), label.clone()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_layout() {
        let p = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25]]).unwrap();
        let mut out = Vec::new();
        write_scatter_csv(&p, &["a".into(), "b".into()], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,y,label\n0.5,-1,a\n2,0.25,b\n");
    }

    #[test]
    fn separated_clusters_score_well() {
        let train = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]]).unwrap();
        let test = Matrix::from_rows(&[[0.05, 0.1], [0.0, 0.1], [5.0, 5.1], [5.1, 5.1]]).unwrap();
        let r = evaluate_embeddings(&train, &[0, 0, 1, 1], &test, &[0, 0, 1, 1], 2, 1).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.balanced_accuracy, 1.0);
        assert!(r.silhouette > 0.9);
        assert!(r.davies_bouldin < 0.1);
    }
}
