//! Multi-seed loss comparison on a shared configuration.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, MetricSummary, RunReport};
use crate::error::{Error, Result};
use crate::losses::{LossHyper, LossKind};

/// One loss setting compared in a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkArm {
    pub label: String,
    pub loss: LossKind,
    pub hyper: LossHyper,
}

impl BenchmarkArm {
    pub fn new(loss: LossKind, hyper: LossHyper) -> Self {
        let label = match loss {
            LossKind::Constellation => format!("constellation:{}", hyper.k),
            other => other.name().to_string(),
        };
        Self { label, loss, hyper }
    }
}

/// Parses `name` or `constellation:K`, filling the other hyperparameters
/// from `base`.
pub fn parse_arm(spec: &str, base: &LossHyper) -> Result<BenchmarkArm> {
    let (name, k) = match spec.split_once(':') {
        Some((name, k)) => {
            let k = k
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("bad K in arm `{spec}`")))?;
            (name.trim(), Some(k))
        }
        None => (spec.trim(), None),
    };
    let loss = LossKind::from_str(name)?;
    if k.is_some() && loss != LossKind::Constellation {
        return Err(Error::InvalidParameter(format!(
            "only constellation takes K, got `{spec}`"
        )));
    }
    let hyper = LossHyper {
        k: k.unwrap_or(base.k),
        ..*base
    };
    hyper.validate()?;
    Ok(BenchmarkArm::new(loss, hyper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Shared settings; its loss, hyperparameters and seed are overridden per run.
    pub base: ExperimentConfig,
    pub arms: Vec<BenchmarkArm>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub label: String,
    pub summary: MetricSummary,
    pub untrained_summary: MetricSummary,
    pub any_non_finite: bool,
    pub run: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub arms: Vec<ArmResult>,
}

impl SeedResult {
    pub fn arm(&self, label: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub arms: Vec<BenchmarkArm>,
    pub seeds: Vec<SeedResult>,
    pub wall_clock_seconds: f64,
}

fn run_is_finite(run: &RunReport) -> bool {
    run.folds.iter().all(|f| {
        let e = &f.eval;
        f.train_loss.iter().chain(&f.val_loss).all(|v| v.is_finite())
            && [e.accuracy, e.balanced_accuracy, e.davies_bouldin, e.silhouette]
                .iter()
                .all(|v| v.is_finite())
    })
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.arms.is_empty() || config.seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "benchmark needs at least one arm and one seed".into(),
        ));
    }
    let started = Instant::now();
    let mut seeds = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut arms = Vec::with_capacity(config.arms.len());
        for arm in &config.arms {
            let run_config = ExperimentConfig {
                loss: arm.loss,
                hyper: arm.hyper,
                seed,
                ..config.base.clone()
            };
            let run = run_experiment(&run_config)?;
            arms.push(ArmResult {
                label: arm.label.clone(),
                summary: run.summary,
                untrained_summary: run.untrained_summary,
                any_non_finite: !run_is_finite(&run),
                run,
            });
        }
        seeds.push(SeedResult { seed, arms });
    }
    Ok(BenchmarkReport {
        arms: config.arms.clone(),
        seeds,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}
