use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, synth_gaussian_clusters, LabeledDataset, SynthParams};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_KNN_K;
use crate::losses::{LossHyper, LossKind};
use crate::model::AdamConfig;
use crate::rng::derive_seed;

pub(crate) const STREAM_DATA: u64 = 0xD47A;
pub(crate) const STREAM_FOLDS: u64 = 0xF01D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        #[serde(flatten)]
        params: SynthParams,
        /// Generator seed; derived from the master seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
        /// `(H, W)` when rows are flattened grids; enables augmentation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_shape: Option<(usize, usize)>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic {
            params: SynthParams::default(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128],
            embedding_dim: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Classes per balanced batch (P).
    pub classes_per_batch: usize,
    /// Samples per class in a balanced batch (Q).
    pub samples_per_class: usize,
    pub adam: AdamConfig,
    /// Random flips/rotations of grid-shaped rows during training.
    pub augment: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            classes_per_batch: 8,
            samples_per_class: 4,
            adam: AdamConfig::default(),
            augment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub loss: LossKind,
    pub hyper: LossHyper,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub folds: usize,
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            loss: LossKind::Constellation,
            hyper: LossHyper::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            folds: 10,
            knn_k: DEFAULT_KNN_K,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.training.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.training.classes_per_batch < 2 || self.training.samples_per_class < 2 {
            return bad("balanced batches need P >= 2 and Q >= 2".into());
        }
        if self.model.embedding_dim == 0 || self.model.hidden.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        if self.knn_k == 0 {
            return bad("knn_k must be >= 1".into());
        }
        if let DatasetSource::Synthetic { params, .. } = &self.dataset {
            params.validate()?;
        }
        Ok(())
    }

    /// Output normalization follows the loss: off for N-pair only.
    pub fn normalize_output(&self) -> bool {
        self.loss.normalizes_output()
    }

    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.model.hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(&self.model.hidden);
        sizes.push(self.model.embedding_dim);
        sizes
    }

    pub fn fold_partition_seed(&self) -> u64 {
        derive_seed(self.seed, STREAM_FOLDS)
    }

    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        match &self.dataset {
            DatasetSource::Synthetic { params, seed } => {
                synth_gaussian_clusters(params, seed.unwrap_or_else(|| derive_seed(self.seed, STREAM_DATA)))
            }
            DatasetSource::Csv { path, grid_shape } => load_csv(path)?.with_grid_shape(*grid_shape),
        }
    }
}
