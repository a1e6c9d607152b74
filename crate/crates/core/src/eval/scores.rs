use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    /// Mean recall over the classes present in the truth labels.
    pub balanced_accuracy: f64,
    pub per_class_recall: Vec<Option<f64>>,
}

pub fn classification_scores(predicted: &[usize], truth: &[usize], n_classes: usize) -> Result<ClassificationScores> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", truth.len()),
            got: format!("{}", predicted.len()),
        });
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no labels to score".into()));
    }
    if let Some(&bad) = truth.iter().chain(predicted).find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} >= n_classes {n_classes}")));
    }
    let mut support = vec![0usize; n_classes];
    let mut hits = vec![0usize; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        support[t] += 1;
        if p == t {
            hits[t] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    let per_class_recall: Vec<Option<f64>> = support
        .iter()
        .zip(&hits)
        .map(|(&s, &h)| (s > 0).then(|| h as f64 / s as f64))
        .collect();
    let present: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
    Ok(ClassificationScores {
        accuracy: correct as f64 / truth.len() as f64,
        balanced_accuracy: present.iter().sum::<f64>() / present.len() as f64,
        per_class_recall,
    })
}
