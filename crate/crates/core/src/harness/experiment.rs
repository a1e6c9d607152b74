use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::batching::{
    build_constellation_batch, build_contrastive_pairs, build_npair_batch, mine_with_fallback, sample_balanced_batch,
    ConstellationBatch,
};
use crate::data::{augment_grid, stratified_kfold, AugmentOp, Fold, LabeledDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_embeddings, EvalReport};
use crate::losses::{
    constellation_loss, contrastive_loss, npair_loss, triplet_loss, ContrastivePair, LossHyper, LossKind, LossResult,
};
use crate::model::{AdamState, MlpEmbedder};
use crate::numerics::Matrix;
use crate::rng::{derive_seed, seeded_rng, SeededRng};

const STREAM_FOLD: u64 = 0xF0;
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_VAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: MeanStd,
    pub balanced_accuracy: MeanStd,
    pub davies_bouldin: MeanStd,
    pub silhouette: MeanStd,
}

impl MetricSummary {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a EvalReport> + Clone) -> Self {
        let collect = |f: fn(&EvalReport) -> f64| -> Vec<f64> { reports.clone().into_iter().map(f).collect() };
        Self {
            accuracy: MeanStd::of(&collect(|r| r.accuracy)),
            balanced_accuracy: MeanStd::of(&collect(|r| r.balanced_accuracy)),
            davies_bouldin: MeanStd::of(&collect(|r| r.davies_bouldin)),
            silhouette: MeanStd::of(&collect(|r| r.silhouette)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Loss on seeded batches drawn from the test split, per epoch.
    pub val_loss: Vec<f64>,
    /// Metrics of the freshly initialized network.
    pub untrained: EvalReport,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset: String,
    pub folds: Vec<FoldReport>,
    pub summary: MetricSummary,
    pub untrained_summary: MetricSummary,
    pub wall_clock_seconds: f64,
}

/// The fold partition for a config. Depends on the labels, `folds` and the
/// master seed only, never on the loss.
pub fn experiment_folds(config: &ExperimentConfig, ds: &LabeledDataset) -> Result<Vec<Fold>> {
    stratified_kfold(ds.labels(), config.folds, config.fold_partition_seed())
}

/// Full cross-validated run: one fresh model per fold, trained on the train
/// split and evaluated on the test split.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let ds = config.load_dataset()?;
    let folds = experiment_folds(config, &ds)?;
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| train_fold(config, &ds, fold, i).map(|(_, report)| report))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        config: config.clone(),
        dataset: ds.name().to_string(),
        summary: MetricSummary::of(reports.iter().map(|r| &r.eval)),
        untrained_summary: MetricSummary::of(reports.iter().map(|r| &r.untrained)),
        folds: reports,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Structure of one training batch, built before the forward pass except for
/// triplets, which are mined from the embeddings.
enum BatchPlan {
    Pairs(Vec<ContrastivePair>),
    Mined,
    NPair,
    Constellation(ConstellationBatch),
}

struct PlannedBatch {
    /// Dataset rows in embedding order.
    rows: Vec<usize>,
    /// Label of each batch row.
    labels: Vec<usize>,
    plan: BatchPlan,
}

/// Batch geometry for one split, clamped to what the split can supply.
#[derive(Debug, Clone, Copy)]
struct BatchShape {
    classes: usize,
    per_class: usize,
}

impl BatchShape {
    fn for_split(config: &ExperimentConfig, ds: &LabeledDataset, rows: &[usize]) -> Result<Self> {
        let mut counts = vec![0usize; ds.n_classes()];
        for &r in rows {
            counts[ds.labels()[r]] += 1;
        }
        let present: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
        let smallest = present.iter().copied().min().unwrap_or(0);
        let per_class = config.training.samples_per_class.min(smallest);
        let classes = config.training.classes_per_batch.min(present.len());
        if per_class < 2 || classes < 2 {
            return Err(Error::InsufficientData(format!(
                "split offers {} classes with at least {smallest} samples; batches need 2 classes of 2",
                present.len()
            )));
        }
        if config.loss == LossKind::Constellation && classes <= config.hyper.k {
            return Err(Error::KExceedsClasses {
                k: config.hyper.k,
                classes,
            });
        }
        Ok(Self { classes, per_class })
    }

    fn rows_per_batch(&self, loss: LossKind, split_classes: usize) -> usize {
        match loss {
            LossKind::NPair => 2 * split_classes,
            _ => self.classes * self.per_class,
        }
    }
}

fn plan_batch(
    loss: LossKind,
    hyper: &LossHyper,
    shape: BatchShape,
    split_rows: &[usize],
    split_labels: &[usize],
    rng: &mut SeededRng,
) -> Result<PlannedBatch> {
    if loss == LossKind::NPair {
        let batch = build_npair_batch(split_labels, rng)?;
        let positions = batch.stacked_rows();
        return Ok(PlannedBatch {
            rows: positions.iter().map(|&p| split_rows[p]).collect(),
            labels: positions.iter().map(|&p| split_labels[p]).collect(),
            plan: BatchPlan::NPair,
        });
    }
    let positions = sample_balanced_batch(split_labels, shape.classes, shape.per_class, rng)?;
    let labels: Vec<usize> = positions.iter().map(|&p| split_labels[p]).collect();
    let plan = match loss {
        LossKind::Contrastive => BatchPlan::Pairs(build_contrastive_pairs(&labels, rng)?),
        LossKind::Triplet => BatchPlan::Mined,
        LossKind::Constellation => BatchPlan::Constellation(build_constellation_batch(&labels, hyper.k, rng)?),
        LossKind::NPair => unreachable!("handled above"),
    };
    Ok(PlannedBatch {
        rows: positions.iter().map(|&p| split_rows[p]).collect(),
        labels,
        plan,
    })
}

fn batch_loss(batch: &PlannedBatch, emb: &Matrix, hyper: &LossHyper) -> Result<Option<LossResult>> {
    match &batch.plan {
        BatchPlan::Pairs(pairs) => contrastive_loss(pairs, emb, hyper.margin).map(Some),
        BatchPlan::Mined => {
            let (triplets, _) = mine_with_fallback(emb, &batch.labels, hyper.alpha)?;
            if triplets.is_empty() {
                return Ok(None);
            }
            triplet_loss(&triplets, emb, hyper.alpha).map(Some)
        }
        BatchPlan::NPair => {
            let n = emb.rows() / 2;
            let anchors = emb.select_rows(&(0..n).collect::<Vec<_>>())?;
            let positives = emb.select_rows(&(n..2 * n).collect::<Vec<_>>())?;
            npair_loss(&anchors, &positives).map(Some)
        }
        BatchPlan::Constellation(kplets) => constellation_loss(kplets, emb, hyper.k).map(Some),
    }
}

fn gather_inputs(ds: &LabeledDataset, rows: &[usize], augment: bool, rng: &mut SeededRng) -> Result<Matrix> {
    let mut inputs = ds.features().select_rows(rows)?;
    if let (true, Some(grid)) = (augment, ds.grid_shape()) {
        for i in 0..inputs.rows() {
            let op = AugmentOp::sample(rng);
            let out = augment_grid(inputs.row(i), grid, op)?;
            inputs.row_mut(i).copy_from_slice(&out);
        }
    }
    Ok(inputs)
}

fn evaluate_model(
    model: &MlpEmbedder,
    config: &ExperimentConfig,
    ds: &LabeledDataset,
    fold: &Fold,
) -> Result<EvalReport> {
    let train_emb = model.embed(&ds.features().select_rows(&fold.train)?)?;
    let test_emb = model.embed(&ds.features().select_rows(&fold.test)?)?;
    evaluate_embeddings(
        &train_emb,
        &ds.labels_of(&fold.train),
        &test_emb,
        &ds.labels_of(&fold.test),
        ds.n_classes(),
        config.knn_k,
    )
}

/// Trains one model on `fold.train` and evaluates it on `fold.test`.
///
/// All randomness comes from streams derived from the master seed and the
/// fold index, so folds can run in any order or in parallel.
pub fn train_fold(
    config: &ExperimentConfig,
    ds: &LabeledDataset,
    fold: &Fold,
    fold_index: usize,
) -> Result<(MlpEmbedder, FoldReport)> {
    let fold_seed = derive_seed(config.seed, STREAM_FOLD + fold_index as u64);
    let wrap = |phase| move |e: Error| e.in_fold(fold_index, phase);

    let train_labels = ds.labels_of(&fold.train);
    let test_labels = ds.labels_of(&fold.test);
    let train_shape = BatchShape::for_split(config, ds, &fold.train).map_err(wrap("setup"))?;
    let val_shape = BatchShape::for_split(config, ds, &fold.test).map_err(wrap("setup"))?;
    let n_train_classes = distinct_classes(&train_labels);
    let n_test_classes = distinct_classes(&test_labels);
    let train_batch_rows = train_shape.rows_per_batch(config.loss, n_train_classes);
    let val_batch_rows = val_shape.rows_per_batch(config.loss, n_test_classes);
    let steps = fold.train.len().div_ceil(train_batch_rows);
    let val_batches = fold.test.len().div_ceil(val_batch_rows);

    let mut model = MlpEmbedder::init(
        &config.layer_sizes(ds.dim()),
        config.normalize_output(),
        &mut seeded_rng(derive_seed(fold_seed, STREAM_INIT)),
    )
    .map_err(wrap("init"))?;
    let untrained = evaluate_model(&model, config, ds, fold).map_err(wrap("evaluate"))?;
    let mut adam = AdamState::new(&model.param_shapes(), config.training.adam);
    let mut rng = seeded_rng(derive_seed(fold_seed, STREAM_TRAIN));

    let mut train_curve = Vec::with_capacity(config.training.epochs);
    let mut val_curve = Vec::with_capacity(config.training.epochs);
    for _epoch in 0..config.training.epochs {
        let mut total = 0.0;
        let mut counted = 0usize;
        for _ in 0..steps {
            let batch = plan_batch(
                config.loss,
                &config.hyper,
                train_shape,
                &fold.train,
                &train_labels,
                &mut rng,
            )
            .map_err(wrap("batch"))?;
            let inputs = gather_inputs(ds, &batch.rows, config.training.augment, &mut rng).map_err(wrap("batch"))?;
            let step = model
                .train_step(&mut adam, &inputs, |emb| batch_loss(&batch, emb, &config.hyper))
                .map_err(wrap("train"))?;
            if let Some(v) = step {
                total += v;
                counted += 1;
            }
        }
        train_curve.push(if counted > 0 { total / counted as f64 } else { 0.0 });

        // same seeded validation batches every epoch
        let mut val_rng = seeded_rng(derive_seed(fold_seed, STREAM_VAL));
        let mut val_total = 0.0;
        let mut val_counted = 0usize;
        for _ in 0..val_batches {
            let batch = plan_batch(
                config.loss,
                &config.hyper,
                val_shape,
                &fold.test,
                &test_labels,
                &mut val_rng,
            )
            .map_err(wrap("validate"))?;
            let emb = model
                .embed(&ds.features().select_rows(&batch.rows)?)
                .map_err(wrap("validate"))?;
            if let Some(loss) = batch_loss(&batch, &emb, &config.hyper).map_err(wrap("validate"))? {
                if !loss.value.is_finite() {
                    return Err(Error::NonFiniteLoss(loss.value).in_fold(fold_index, "validate"));
                }
                val_total += loss.value;
                val_counted += 1;
            }
        }
        val_curve.push(if val_counted > 0 {
            val_total / val_counted as f64
        } else {
            0.0
        });
    }

    let eval = evaluate_model(&model, config, ds, fold).map_err(wrap("evaluate"))?;
    let report = FoldReport {
        fold: fold_index,
        train_size: fold.train.len(),
        test_size: fold.test.len(),
        train_loss: train_curve,
        val_loss: val_curve,
        untrained,
        eval,
    };
    Ok((model, report))
}

fn distinct_classes(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}
