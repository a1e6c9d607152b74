//! Labeled datasets: CSV ingestion, the synthetic cluster generator,
//! stratified k-fold splitting and grid augmentation.

mod augment;
mod csv_io;
mod folds;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use augment::{augment_grid, AugmentOp};
pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use folds::{stratified_kfold, Fold};
pub use synth::{synth_gaussian_clusters, SynthParams};

/// Feature matrix with contiguous 0-based class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    /// Original label token of each class id.
    class_names: Vec<String>,
    grid_shape: Option<(usize, usize)>,
    name: String,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        grid_shape: Option<(usize, usize)>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", features.rows()),
                got: format!("{} labels", labels.len()),
            });
        }
        let mut present = vec![false; class_names.len()];
        for &l in &labels {
            match present.get_mut(l) {
                Some(p) => *p = true,
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "label {l} outside the {} named classes",
                        class_names.len()
                    )))
                }
            }
        }
        if let Some(c) = present.iter().position(|p| !p) {
            return Err(Error::InvalidParameter(format!("class ids not contiguous: {c} unused")));
        }
        if let Some((h, w)) = grid_shape {
            if h * w != features.cols() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} features", features.cols()),
                    got: format!("grid {h}x{w}"),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            class_names,
            grid_shape,
            name: name.into(),
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        self.grid_shape
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_grid_shape(mut self, grid_shape: Option<(usize, usize)>) -> Result<Self> {
        if let Some((h, w)) = grid_shape {
            if h * w != self.dim() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} features", self.dim()),
                    got: format!("grid {h}x{w}"),
                });
            }
        }
        self.grid_shape = grid_shape;
        Ok(self)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Labels of the given rows, in order.
    pub fn labels_of(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }
}
