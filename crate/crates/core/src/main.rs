use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use metric_embed::data::{load_csv, save_csv, synth_gaussian_clusters, SynthParams};
use metric_embed::error::{Error, Result};
use metric_embed::eval::{evaluate_embeddings, evaluate_embeddings_loo, pca_project_2d, write_scatter_csv, EvalReport};
use metric_embed::harness::{
    experiment_folds, gradcheck_command, parse_arm, run_benchmark, run_experiment, train_fold, BenchmarkConfig,
    DatasetSource, ExperimentConfig, FoldReport,
};
use metric_embed::losses::LossKind;
use metric_embed::model::{load_checkpoint, save_checkpoint};

#[derive(Parser)]
#[command(
    name = "metric-embed",
    version,
    about = "Metric-learning embeddings: train, evaluate, compare losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-cluster dataset as CSV.
    GenData(GenDataArgs),
    /// Train on one fold's train split and evaluate on its test split.
    Train(TrainArgs),
    /// Full k-fold cross-validated run.
    Experiment(ExperimentArgs),
    /// Evaluate a checkpoint on a CSV dataset.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Multi-seed comparison of several losses.
    Benchmark(BenchmarkArgs),
    /// 2-D PCA projection of checkpoint embeddings as a scatter CSV.
    Project(ProjectArgs),
}

#[derive(Args, Clone, Default)]
struct SynthFlags {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
}

impl SynthFlags {
    fn apply(&self, p: &mut SynthParams) {
        if let Some(v) = self.classes {
            p.classes = v;
        }
        if let Some(v) = self.per_class {
            p.per_class = v;
        }
        if let Some(v) = self.dim {
            p.dim = v;
        }
        if let Some(v) = self.separation {
            p.separation = v;
        }
        if let Some(v) = self.spread {
            p.spread = v;
        }
    }

    fn any(&self) -> bool {
        self.classes.is_some()
            || self.per_class.is_some()
            || self.dim.is_some()
            || self.separation.is_some()
            || self.spread.is_some()
    }
}

/// Flags mirroring `ExperimentConfig`; given flags override `--config`.
#[derive(Args, Clone)]
struct ConfigFlags {
    /// Full experiment config as a JSON document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV dataset; synthetic data is generated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Grid shape `HxW` of CSV rows, enabling augmentation.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Negatives per anchor for the constellation loss.
    #[arg(long)]
    k: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    classes_per_batch: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    knn_k: Option<usize>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h = h.parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w = w.parse().map_err(|_| format!("bad width in {s:?}"))?;
    Ok((h, w))
}

impl ConfigFlags {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(path) => serde_json::from_str(&read_text(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(path) = &self.data {
            cfg.dataset = DatasetSource::Csv {
                path: path.clone(),
                grid_shape: self.grid,
            };
        } else if let DatasetSource::Csv { grid_shape, .. } = &mut cfg.dataset {
            if self.grid.is_some() {
                *grid_shape = self.grid;
            }
        }
        if let DatasetSource::Synthetic { params, .. } = &mut cfg.dataset {
            self.synth.apply(params);
        } else if self.synth.any() {
            return Err(Error::InvalidParameter(
                "synthetic flags given with a CSV dataset".into(),
            ));
        }
        if let Some(v) = self.loss {
            cfg.loss = v;
        }
        if let Some(v) = self.margin {
            cfg.hyper.margin = v;
        }
        if let Some(v) = self.alpha {
            cfg.hyper.alpha = v;
        }
        if let Some(v) = self.k {
            cfg.hyper.k = v;
        }
        if let Some(v) = &self.hidden {
            cfg.model.hidden = v.clone();
        }
        if let Some(v) = self.embedding_dim {
            cfg.model.embedding_dim = v;
        }
        if let Some(v) = self.epochs {
            cfg.training.epochs = v;
        }
        if let Some(v) = self.classes_per_batch {
            cfg.training.classes_per_batch = v;
        }
        if let Some(v) = self.samples_per_class {
            cfg.training.samples_per_class = v;
        }
        if let Some(v) = self.lr {
            cfg.training.adam.lr = v;
        }
        if self.no_augment {
            cfg.training.augment = false;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.knn_k {
            cfg.knn_k = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic parameters as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthFlags,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Fold whose train split is used.
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Where to save the trained model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled CSV to evaluate.
    #[arg(long)]
    data: PathBuf,
    /// Reference set for k-NN; leave-one-out on `--data` when absent.
    #[arg(long)]
    train_data: Option<PathBuf>,
    #[arg(long, default_value_t = metric_embed::eval::DEFAULT_KNN_K)]
    knn_k: usize,
    /// Accepted for uniformity; evaluation draws no randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON with optional `knn_k`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Loss to check; all four when absent. Repeatable.
    #[arg(long)]
    loss: Vec<LossKind>,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON with optional `losses`, `instances`, `seed`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Comma-separated arms, e.g. `constellation:3,triplet`.
    #[arg(long, default_value = "constellation:3,triplet,contrastive,npair")]
    arms: String,
    /// Number of master seeds, starting at `--seed` (or the config seed).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Accepted for uniformity; projection draws no randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output scatter CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct TrainReport {
    config: ExperimentConfig,
    dataset: String,
    fold: FoldReport,
    wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct EvalOutput {
    data: PathBuf,
    reference: Option<PathBuf>,
    knn_k: usize,
    eval: EvalReport,
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json_field<T: serde::de::DeserializeOwned>(path: &Option<PathBuf>, key: &str) -> Result<Option<T>> {
    let Some(path) = path else { return Ok(None) };
    let doc: serde_json::Value = serde_json::from_str(&read_text(path)?)?;
    match doc.get(key) {
        Some(v) => Ok(Some(serde_json::from_value(v.clone())?)),
        None => Ok(None),
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let mut params: SynthParams = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?)?,
        None => SynthParams::default(),
    };
    args.synth.apply(&mut params);
    let ds = synth_gaussian_clusters(&params, args.seed)?;
    save_csv(&ds, &args.out)
}

fn train(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.flags.resolve()?;
    let ds = cfg.load_dataset()?;
    let folds = experiment_folds(&cfg, &ds)?;
    let fold = folds
        .get(args.fold)
        .ok_or_else(|| Error::InvalidParameter(format!("fold {} out of range 0..{}", args.fold, folds.len())))?;
    let (model, report) = train_fold(&cfg, &ds, fold, args.fold)?;
    if let Some(path) = &args.checkpoint {
        save_checkpoint(&model, path)?;
    }
    let e = &report.eval;
    eprintln!(
        "fold {}: accuracy {:.4} silhouette {:.4} davies-bouldin {:.4}",
        args.fold, e.accuracy, e.silhouette, e.davies_bouldin
    );
    let out = TrainReport {
        config: cfg,
        dataset: ds.name().to_string(),
        fold: report,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    emit(&out, args.out.as_deref())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let report = run_experiment(&cfg)?;
    let s = &report.summary;
    eprintln!(
        "{}: accuracy {:.4} ± {:.4}, silhouette {:.4} ± {:.4}",
        cfg.loss, s.accuracy.mean, s.accuracy.std, s.silhouette.mean, s.silhouette.std
    );
    emit(&report, args.out.as_deref())
}

fn eval(args: EvalArgs) -> Result<()> {
    let knn_k = json_field(&args.config, "knn_k")?.unwrap_or(args.knn_k);
    let model = load_checkpoint(&args.checkpoint)?;
    let ds = load_csv(&args.data)?;
    let emb = model.embed(ds.features())?;
    let report = match &args.train_data {
        Some(path) => {
            let reference = load_csv(path)?;
            if reference.class_names() != ds.class_names() {
                return Err(Error::InvalidParameter(
                    "reference and evaluation class sets differ".into(),
                ));
            }
            let ref_emb = model.embed(reference.features())?;
            evaluate_embeddings(&ref_emb, reference.labels(), &emb, ds.labels(), ds.n_classes(), knn_k)?
        }
        None => evaluate_embeddings_loo(&emb, ds.labels(), ds.n_classes(), knn_k)?,
    };
    eprintln!(
        "accuracy {:.4} silhouette {:.4} davies-bouldin {:.4}",
        report.accuracy, report.silhouette, report.davies_bouldin
    );
    emit(
        &EvalOutput {
            data: args.data,
            reference: args.train_data,
            knn_k,
            eval: report,
        },
        args.out.as_deref(),
    )
}

fn gradcheck(args: GradcheckArgs) -> Result<bool> {
    let mut losses = args.loss.clone();
    if losses.is_empty() {
        losses = json_field(&args.config, "losses")?.unwrap_or_else(|| LossKind::ALL.to_vec());
    }
    let instances = if args.instances == 100 {
        json_field(&args.config, "instances")?.unwrap_or(args.instances)
    } else {
        args.instances
    };
    let seed = if args.seed == 0 {
        json_field(&args.config, "seed")?.unwrap_or(0)
    } else {
        args.seed
    };
    let summary = gradcheck_command(&losses, seed, instances, args.corrupt_gradient)?;
    for c in &summary.checks {
        println!(
            "{} {}: {} instances, embedding max rel err {:.3e}, parameter max rel err {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.loss,
            c.instances,
            c.embedding_max_rel_err,
            c.parameter_max_rel_err
        );
    }
    if let Some(path) = &args.out {
        emit(&summary, Some(path))?;
    }
    Ok(summary.passed)
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let base = args.flags.resolve()?;
    let arms = args
        .arms
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_arm(s, &base.hyper))
        .collect::<Result<Vec<_>>>()?;
    let seeds = (0..args.seeds).map(|i| base.seed + i).collect();
    let report = run_benchmark(&BenchmarkConfig { base, arms, seeds })?;
    for seed in &report.seeds {
        for arm in &seed.arms {
            eprintln!(
                "seed {} {}: accuracy {:.4} silhouette {:.4} (untrained {:.4})",
                seed.seed,
                arm.label,
                arm.summary.accuracy.mean,
                arm.summary.silhouette.mean,
                arm.untrained_summary.silhouette.mean
            );
        }
    }
    emit(&report, args.out.as_deref())
}

fn project(args: ProjectArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let ds = load_csv(&args.data)?;
    let emb = model.embed(ds.features())?;
    let pca = pca_project_2d(&emb)?;
    let names: Vec<String> = ds.labels().iter().map(|&l| ds.class_names()[l].clone()).collect();
    let file = fs::File::create(&args.out)?;
    write_scatter_csv(&pca.projection, &names, BufWriter::new(file))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Experiment(a) => experiment(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Benchmark(a) => benchmark(a).map(|_| true),
        Command::Project(a) => project(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
