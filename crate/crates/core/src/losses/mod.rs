//! Embedding losses with analytic gradients.
//!
//! Each loss consumes an embedding batch (one row per embedding) plus an index
//! structure naming the rows that take part, and returns the scalar value with
//! `d loss / d embedding` laid out like the batch. Rows that no tuple references
//! get an exactly-zero gradient row.

mod constellation;
mod contrastive;
mod finite_diff;
mod npair;
mod triplet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use constellation::constellation_loss;
pub use contrastive::{contrastive_loss, ContrastivePair, PairKind};
pub use finite_diff::{finite_diff_grad, max_relative_error, DEFAULT_FD_STEP};
pub use npair::npair_loss;
pub use triplet::triplet_loss;

/// Loss value and its gradient with respect to the input embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Matrix,
}

/// The four supported loss families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Contrastive,
    Triplet,
    #[serde(rename = "npair")]
    NPair,
    Constellation,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Contrastive,
        LossKind::Triplet,
        LossKind::NPair,
        LossKind::Constellation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Contrastive => "contrastive",
            LossKind::Triplet => "triplet",
            LossKind::NPair => "npair",
            LossKind::Constellation => "constellation",
        }
    }

    /// N-pair folds the normalization into its dot products; the others train
    /// on unit-norm embeddings.
    pub fn normalizes_output(self) -> bool {
        self != LossKind::NPair
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "contrastive" => Ok(LossKind::Contrastive),
            "triplet" => Ok(LossKind::Triplet),
            "npair" | "n-pair" | "npair-mc" => Ok(LossKind::NPair),
            "constellation" => Ok(LossKind::Constellation),
            other => Err(Error::InvalidParameter(format!("unknown loss {other:?}"))),
        }
    }
}

/// Loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossHyper {
    /// Contrastive margin.
    pub margin: f64,
    /// Triplet margin.
    pub alpha: f64,
    /// Negatives per anchor for the constellation loss.
    pub k: usize,
}

impl Default for LossHyper {
    fn default() -> Self {
        Self {
            margin: 1.0,
            alpha: 0.2,
            k: 3,
        }
    }
}

impl LossHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "margin must be > 0, got {}",
                self.margin
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        Err(Error::IndexOutOfRange { index, len })
    } else {
        Ok(())
    }
}
