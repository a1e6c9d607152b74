//! Analytic-vs-central-difference gradient checks on seeded random instances,
//! both in embedding space and end to end through a small embedder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batching::{build_constellation_batch, ConstellationBatch, Triplet, TripletIndexSet};
use crate::error::{Error, Result};
use crate::losses::{
    constellation_loss, contrastive_loss, finite_diff_grad, max_relative_error, npair_loss, triplet_loss,
    ContrastivePair, LossHyper, LossKind, LossResult, PairKind, DEFAULT_FD_STEP,
};
use crate::model::MlpEmbedder;
use crate::numerics::{euclidean, sq_dist, Matrix};
use crate::rng::{derive_seed, seeded_rng, SeededRng};

pub const EMBEDDING_TOLERANCE: f64 = 1e-6;
pub const PARAMETER_TOLERANCE: f64 = 1e-5;
/// Instances whose hinge argument lies within this band are redrawn.
pub const KINK_BAND: f64 = 1e-3;
const MAX_DRAWS: usize = 10_000;
/// Layer sizes of the end-to-end check network.
pub const PARAMETER_CHECK_NET: [usize; 3] = [2, 3, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossGradcheck {
    pub loss: LossKind,
    pub instances: usize,
    pub embedding_max_rel_err: f64,
    pub parameter_max_rel_err: f64,
    pub embedding_tolerance: f64,
    pub parameter_tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub seed: u64,
    pub checks: Vec<LossGradcheck>,
    pub passed: bool,
}

/// A loss instance with its tuple structure frozen, so the loss is a smooth
/// function of the embeddings alone.
#[derive(Debug, Clone)]
pub enum LossInstance {
    Contrastive(Vec<ContrastivePair>),
    Triplet(TripletIndexSet),
    NPair,
    Constellation(ConstellationBatch),
}

impl LossInstance {
    pub fn evaluate(&self, emb: &Matrix, hyper: &LossHyper) -> Result<LossResult> {
        match self {
            LossInstance::Contrastive(pairs) => contrastive_loss(pairs, emb, hyper.margin),
            LossInstance::Triplet(set) => triplet_loss(set, emb, hyper.alpha),
            LossInstance::NPair => {
                let n = emb.rows() / 2;
                let a = emb.select_rows(&(0..n).collect::<Vec<_>>())?;
                let p = emb.select_rows(&(n..2 * n).collect::<Vec<_>>())?;
                npair_loss(&a, &p)
            }
            LossInstance::Constellation(batch) => constellation_loss(batch, emb, hyper.k),
        }
    }

    /// Whether `emb` keeps every hinge of this instance out of the kink band.
    fn clear_of_kinks(&self, emb: &Matrix, hyper: &LossHyper) -> bool {
        match self {
            LossInstance::Contrastive(pairs) => pairs.iter().all(|p| {
                let d = euclidean(emb.row(p.first), emb.row(p.second));
                p.kind == PairKind::Similar || ((d - hyper.margin).abs() > KINK_BAND && d > KINK_BAND)
            }),
            LossInstance::Triplet(set) => {
                let args: Vec<f64> = set
                    .iter()
                    .map(|t| {
                        let a = emb.row(t.anchor);
                        sq_dist(a, emb.row(t.positive)) - sq_dist(a, emb.row(t.negative)) + hyper.alpha
                    })
                    .collect();
                args.iter().all(|v| v.abs() > KINK_BAND) && args.iter().any(|&v| v > 0.0)
            }
            LossInstance::NPair | LossInstance::Constellation(_) => true,
        }
    }
}

/// Row count and tuple structure of a random instance.
fn draw_structure(loss: LossKind, hyper: &LossHyper, rng: &mut SeededRng) -> Result<(usize, LossInstance)> {
    Ok(match loss {
        LossKind::Contrastive => {
            let rows = 8;
            let pairs = (0..6)
                .map(|_| {
                    let first = rng.random_range(0..rows);
                    let second = (first + rng.random_range(1..rows)) % rows;
                    let kind = if rng.random_bool(0.5) {
                        PairKind::Similar
                    } else {
                        PairKind::Dissimilar
                    };
                    ContrastivePair::new(first, second, kind)
                })
                .collect();
            (rows, LossInstance::Contrastive(pairs))
        }
        LossKind::Triplet => {
            // three classes of three rows: labels r / 3
            let rows = 9;
            let triplets = (0..6)
                .map(|_| {
                    let class = rng.random_range(0..3);
                    let anchor = class * 3 + rng.random_range(0..3);
                    let positive = class * 3 + (anchor % 3 + rng.random_range(1..3)) % 3;
                    let other = (class + rng.random_range(1..3)) % 3;
                    Triplet::new(anchor, positive, other * 3 + rng.random_range(0..3))
                })
                .collect::<Vec<_>>();
            (rows, LossInstance::Triplet(triplets.into()))
        }
        LossKind::NPair => (8, LossInstance::NPair),
        LossKind::Constellation => {
            let labels: Vec<usize> = (0..12).map(|r| r / 2).collect();
            let k = hyper.k.min(5);
            (
                12,
                LossInstance::Constellation(build_constellation_batch(&labels, k, rng)?),
            )
        }
    })
}

fn check_hyper(loss: LossKind) -> LossHyper {
    match loss {
        LossKind::Constellation => LossHyper {
            k: 4,
            ..LossHyper::default()
        },
        _ => LossHyper::default(),
    }
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut SeededRng) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).expect("finite draws")
}

fn corrupt(grad: &mut [f64]) {
    let bump = 1e-3 * grad.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    grad[0] += bump;
}

/// Max relative error of one embedding-space instance.
pub fn embedding_instance_error(loss: LossKind, seed: u64, corrupt_analytic: bool) -> Result<f64> {
    let hyper = check_hyper(loss);
    let mut rng = seeded_rng(seed);
    for _ in 0..MAX_DRAWS {
        let (rows, instance) = draw_structure(loss, &hyper, &mut rng)?;
        let (dim, scale) = match loss {
            LossKind::Contrastive => (5, 0.4),
            LossKind::Triplet => (4, 0.5),
            LossKind::NPair | LossKind::Constellation => (8, 0.7),
        };
        let x = random_matrix(rows, dim, scale, &mut rng);
        if !instance.clear_of_kinks(&x, &hyper) {
            continue;
        }
        let mut analytic = instance.evaluate(&x, &hyper)?.grad;
        if corrupt_analytic {
            corrupt(analytic.as_mut_slice());
        }
        let numeric = finite_diff_grad(
            |m| instance.evaluate(m, &hyper).map(|r| r.value).unwrap_or(f64::NAN),
            &x,
            DEFAULT_FD_STEP,
        );
        return Ok(max_relative_error(&analytic, &numeric));
    }
    Err(Error::InsufficientData(format!(
        "no kink-free {loss} instance in {MAX_DRAWS} draws"
    )))
}

/// Max relative error of one parameter-space instance: the loss composed with
/// a 2-3-2 embedder, differentiated with respect to every weight and bias.
pub fn parameter_instance_error(loss: LossKind, seed: u64, corrupt_analytic: bool) -> Result<f64> {
    let hyper = check_hyper(loss);
    let mut rng = seeded_rng(seed);
    for _ in 0..MAX_DRAWS {
        let (rows, instance) = draw_structure(loss, &hyper, &mut rng)?;
        let mut model = MlpEmbedder::init(&PARAMETER_CHECK_NET, loss.normalizes_output(), &mut rng)?;
        let mut params = model.parameters_flat();
        for p in params.iter_mut() {
            *p += 0.1 * rng.random_range(-1.0..1.0);
        }
        model.set_parameters_flat(&params)?;
        let inputs = random_matrix(rows, PARAMETER_CHECK_NET[0], 1.5, &mut rng);
        if !hidden_clear_of_kinks(&model, &inputs) {
            continue;
        }
        let (emb, cache) = model.forward_batch(&inputs)?;
        if !instance.clear_of_kinks(&emb, &hyper) {
            continue;
        }
        let loss_grad = instance.evaluate(&emb, &hyper)?.grad;
        let mut analytic = model.backward(&cache, &loss_grad)?.flatten();
        if corrupt_analytic {
            corrupt(&mut analytic);
        }
        let theta = Matrix::new(1, params.len(), params.clone())?;
        let numeric = finite_diff_grad(
            |t| {
                let mut probe = model.clone();
                probe
                    .set_parameters_flat(t.as_slice())
                    .and_then(|_| probe.embed(&inputs))
                    .and_then(|e| instance.evaluate(&e, &hyper))
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN)
            },
            &theta,
            DEFAULT_FD_STEP,
        );
        return Ok(crate::losses::max_relative_error(
            &Matrix::new(1, analytic.len(), analytic)?,
            &numeric,
        ));
    }
    Err(Error::InsufficientData(format!(
        "no kink-free {loss} network instance in {MAX_DRAWS} draws"
    )))
}

/// ReLU kinks break central differences; require every hidden
/// pre-activation to sit clear of zero.
fn hidden_clear_of_kinks(model: &MlpEmbedder, inputs: &Matrix) -> bool {
    let hidden_layers = model.weights().len() - 1;
    let mut act = inputs.clone();
    for l in 0..hidden_layers {
        let w = &model.weights()[l];
        let b = &model.biases()[l];
        let mut next = Matrix::zeros(act.rows(), w.rows());
        for i in 0..act.rows() {
            for (o, bo) in b.iter().enumerate() {
                let z = crate::numerics::dot(w.row(o), act.row(i)) + bo;
                if z.abs() < KINK_BAND {
                    return false;
                }
                next.set(i, o, z.max(0.0));
            }
        }
        act = next;
    }
    true
}

/// Runs `instances` embedding-space and parameter-space checks for one loss.
pub fn gradcheck_loss(loss: LossKind, seed: u64, instances: usize, corrupt_analytic: bool) -> Result<LossGradcheck> {
    let base = derive_seed(seed, loss as u64);
    let mut emb_err = 0.0_f64;
    let mut par_err = 0.0_f64;
    for i in 0..instances {
        emb_err = emb_err.max(embedding_instance_error(
            loss,
            derive_seed(base, 2 * i as u64),
            corrupt_analytic,
        )?);
        par_err = par_err.max(parameter_instance_error(
            loss,
            derive_seed(base, 2 * i as u64 + 1),
            corrupt_analytic,
        )?);
    }
    Ok(LossGradcheck {
        loss,
        instances,
        embedding_max_rel_err: emb_err,
        parameter_max_rel_err: par_err,
        embedding_tolerance: EMBEDDING_TOLERANCE,
        parameter_tolerance: PARAMETER_TOLERANCE,
        passed: instances > 0 && emb_err < EMBEDDING_TOLERANCE && par_err < PARAMETER_TOLERANCE,
    })
}

pub fn gradcheck_command(
    losses: &[LossKind],
    seed: u64,
    instances: usize,
    corrupt_analytic: bool,
) -> Result<GradcheckSummary> {
    let checks = losses
        .iter()
        .map(|&l| gradcheck_loss(l, seed, instances, corrupt_analytic))
        .collect::<Result<Vec<_>>>()?;
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradcheckSummary { seed, checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_loss_passes_a_few_instances() {
        for loss in LossKind::ALL {
            let c = gradcheck_loss(loss, 3, 5, false).unwrap();
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        for loss in LossKind::ALL {
            let c = gradcheck_loss(loss, 3, 2, true).unwrap();
            assert!(!c.passed, "{c:?}");
        }
    }
}
