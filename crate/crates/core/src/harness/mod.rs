//! Experiment orchestration: cross-validated runs, gradient checks and the
//! multi-seed loss comparison.

pub mod benchmark;
pub mod config;
pub mod experiment;
pub mod gradcheck;

pub use benchmark::{parse_arm, run_benchmark, ArmResult, BenchmarkArm, BenchmarkConfig, BenchmarkReport, SeedResult};
pub use config::{DatasetSource, ExperimentConfig, ModelConfig, TrainingConfig};
pub use experiment::{experiment_folds, run_experiment, train_fold, FoldReport, MeanStd, MetricSummary, RunReport};
pub use gradcheck::{gradcheck_command, gradcheck_loss, GradcheckSummary, LossGradcheck};
