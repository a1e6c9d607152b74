use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::seeded_rng;

/// Parameters of the Gaussian cluster generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Distance of every class center from the origin.
    pub separation: f64,
    /// RMS distance of a sample from its class center.
    pub spread: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            classes: 8,
            per_class: 80,
            dim: 16,
            separation: 4.0,
            spread: 1.5,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.classes >= 2
            && self.per_class >= 1
            && self.dim >= 2
            && self.separation > 0.0
            && self.separation.is_finite()
            && self.spread > 0.0
            && self.spread.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid synthetic parameters {self:?}"
            )))
        }
    }

    /// Unit center directions: axis-aligned when `classes <= dim`, otherwise
    /// normalized Gaussian draws.
    fn directions(&self, rng: &mut crate::rng::SeededRng) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|c| {
                if self.classes <= self.dim {
                    let mut u = vec![0.0; self.dim];
                    u[c] = 1.0;
                    u
                } else {
                    loop {
                        let u: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
                        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > 1e-6 {
                            break u.into_iter().map(|v| v / norm).collect();
                        }
                    }
                }
            })
            .collect()
    }

    pub fn centers(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed);
        self.directions(&mut rng)
            .into_iter()
            .map(|u| u.into_iter().map(|v| v * self.separation).collect())
            .collect()
    }
}

/// Isotropic Gaussian clusters, `per_class` rows per class, rows grouped by
/// class. Each coordinate gets noise of standard deviation `spread / sqrt(dim)`.
pub fn synth_gaussian_clusters(params: &SynthParams, seed: u64) -> Result<LabeledDataset> {
    params.validate()?;
    let mut rng = seeded_rng(seed);
    let centers: Vec<Vec<f64>> = params
        .directions(&mut rng)
        .into_iter()
        .map(|u| u.into_iter().map(|v| v * params.separation).collect())
        .collect();
    let noise = Normal::new(0.0, params.spread / (params.dim as f64).sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut data = Vec::with_capacity(params.classes * params.per_class * params.dim);
    let mut labels = Vec::with_capacity(params.classes * params.per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..params.per_class {
            data.extend(center.iter().map(|m| m + noise.sample(&mut rng)));
            labels.push(c);
        }
    }
    let features = Matrix::new(labels.len(), params.dim, data)?;
    let class_names = (0..params.classes).map(|c| c.to_string()).collect();
    let name = format!(
        "synthetic-{}x{}-d{}-sep{}-s{}",
        params.classes, params.per_class, params.dim, params.separation, params.spread
    );
    LabeledDataset::new(features, labels, class_names, None, name)
}
