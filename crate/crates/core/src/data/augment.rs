use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid transforms of a row-major `H x W` grid. Rotations are clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    Identity,
    FlipH,
    FlipV,
    Rot90,
    Rot180,
    Rot270,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 6] = [
        AugmentOp::Identity,
        AugmentOp::FlipH,
        AugmentOp::FlipV,
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
    ];

    /// Uniform over all six ops, identity included.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..Self::ALL.len())]
    }
}

pub fn augment_grid(row: &[f64], grid_shape: (usize, usize), op: AugmentOp) -> Result<Vec<f64>> {
    let (h, w) = grid_shape;
    if h * w != row.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", h * w),
            got: format!("{}", row.len()),
        });
    }
    let at = |i: usize, j: usize| row[i * w + j];
    let square = || {
        if h == w {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{op:?} needs a square grid, got {h}x{w}"
            )))
        }
    };
    let out = match op {
        AugmentOp::Identity => row.to_vec(),
        AugmentOp::FlipH => (0..h)
            .flat_map(|i| (0..w).map(move |j| (i, w - 1 - j)))
            .map(|(i, j)| at(i, j))
            .collect(),
        AugmentOp::FlipV => (0..h)
            .flat_map(|i| (0..w).map(move |j| (h - 1 - i, j)))
            .map(|(i, j)| at(i, j))
            .collect(),
        AugmentOp::Rot180 => {
            square()?;
            row.iter().rev().copied().collect()
        }
        AugmentOp::Rot90 => {
            square()?;
            let n = h;
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (n - 1 - j, i)))
                .map(|(i, j)| at(i, j))
                .collect()
        }
        AugmentOp::Rot270 => {
            square()?;
            let n = h;
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (j, n - 1 - i)))
                .map(|(i, j)| at(i, j))
                .collect()
        }
    };
    Ok(out)
}
