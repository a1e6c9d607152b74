//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use metric_embed::batching::{mine_triplets, ConstellationBatch, KPlet, MiningMode, Triplet, TripletIndexSet};
use metric_embed::data::SynthParams;
use metric_embed::eval::{davies_bouldin, silhouette};
use metric_embed::harness::{
    experiment_folds, gradcheck_command, parse_arm, run_benchmark, BenchmarkConfig, DatasetSource, ExperimentConfig,
};
use metric_embed::losses::{
    constellation_loss, contrastive_loss, npair_loss, triplet_loss, ContrastivePair, LossHyper, LossKind, PairKind,
};
use metric_embed::Matrix;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let summary = match gradcheck_command(&LossKind::ALL, 0, 100, false) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let secs = started.elapsed().as_secs_f64();
    let worst: Vec<String> = summary
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} emb {:.1e} par {:.1e}",
                c.loss, c.embedding_max_rel_err, c.parameter_max_rel_err
            )
        })
        .collect();
    outcome(
        summary.passed && secs < 30.0,
        format!("100 instances/loss, {}; {secs:.1}s", worst.join(", ")),
    )
}

fn spot_values() -> Outcome {
    let mut errs = Vec::new();
    let x = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
    let v = contrastive_loss(&[ContrastivePair::new(0, 1, PairKind::Similar)], &x, 1.0)
        .unwrap()
        .value;
    errs.push(("contrastive 12.5", (v - 12.5).abs()));

    let e = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]).unwrap();
    let batch = ConstellationBatch::from(vec![KPlet::new(0, 1, vec![2, 3, 4])]);
    let v = constellation_loss(&batch, &e, 3).unwrap().value;
    errs.push(("constellation log 4", (v - 4f64.ln()).abs()));

    let a = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
    let v = npair_loss(&a, &a).unwrap().value;
    errs.push(("npair log 2", (v - 2f64.ln()).abs()));

    let t = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
    let set: TripletIndexSet = vec![Triplet::new(0, 1, 2)].into();
    let v = triplet_loss(&set, &t, 0.2).unwrap().value;
    errs.push(("triplet inactive 0", v.abs()));

    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    outcome(
        worst <= 1e-12,
        format!("max abs error {worst:.1e} over {} spot values", errs.len()),
    )
}

fn mining() -> Outcome {
    let mut r = rng(300);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=24);
        let classes = r.random_range(1..=5.min(n));
        let d = r.random_range(1..=4);
        let x = random_points(&mut r, n, d, 1.0);
        let labels = random_labels(&mut r, n, classes);
        let alpha = r.random_range(0.0..0.8);
        for mode in [MiningMode::Hard, MiningMode::SemiHard, MiningMode::AllValid] {
            let got: BTreeSet<_> = mine_triplets(&x, &labels, alpha, mode)
                .unwrap()
                .iter()
                .map(|t| (t.anchor, t.positive, t.negative))
                .collect();
            if got != brute_force_triplets(&x, &labels, alpha, mode) {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("200 batches x 3 modes, {mismatches} mismatches"),
    )
}

fn metrics() -> Outcome {
    let mut r = rng(400);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = r.random_range(8..=200);
        let classes = r.random_range(2..=8);
        let d = r.random_range(1..=8);
        let x = random_points(&mut r, n, d, 2.0);
        let labels = random_labels(&mut r, n, classes);
        worst = worst.max((davies_bouldin(&x, &labels).unwrap() - davies_bouldin_oracle(&x, &labels)).abs());
        worst = worst.max((silhouette(&x, &labels).unwrap() - silhouette_oracle(&x, &labels)).abs());
    }
    let db = davies_bouldin(
        &Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [10.0, 0.0], [12.0, 0.0]]).unwrap(),
        &[0, 0, 1, 1],
    )
    .unwrap();
    let sil = silhouette(
        &Matrix::from_rows(&[[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]]).unwrap(),
        &[0, 0, 1, 1],
    )
    .unwrap();
    let hand_ok = (db - 0.2).abs() < 1e-4 && (sil - 0.8020).abs() < 1e-4;
    outcome(
        worst < 1e-9 && hand_ok,
        format!("oracle max diff {worst:.1e} on 100 instances; DB {db:.6}, silhouette {sil:.6}"),
    )
}

fn protocol() -> Outcome {
    let mut problems = Vec::new();
    for seed in 0..5 {
        let configs: Vec<ExperimentConfig> = LossKind::ALL
            .iter()
            .map(|&loss| ExperimentConfig {
                loss,
                seed,
                ..Default::default()
            })
            .collect();
        let ds = configs[0].load_dataset().unwrap();
        let reference = experiment_folds(&configs[0], &ds).unwrap();
        if experiment_folds(&configs[0], &ds).unwrap() != reference {
            problems.push(format!("seed {seed}: not deterministic"));
        }
        for cfg in &configs[1..] {
            if experiment_folds(cfg, &ds).unwrap() != reference {
                problems.push(format!("seed {seed}: {} folds differ", cfg.loss));
            }
        }
        if reference.len() != 10 {
            problems.push(format!("seed {seed}: {} folds", reference.len()));
        }
        let mut seen = vec![0; ds.len()];
        for f in &reference {
            f.test.iter().for_each(|&i| seen[i] += 1);
            let mut union: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            union.sort_unstable();
            if union != (0..ds.len()).collect::<Vec<_>>() {
                problems.push(format!("seed {seed}: train/test not complementary"));
            }
        }
        if seen.iter().any(|&s| s != 1) {
            problems.push(format!("seed {seed}: test splits do not partition"));
        }
        for c in 0..ds.n_classes() {
            let per: Vec<usize> = reference
                .iter()
                .map(|f| f.test.iter().filter(|&&i| ds.labels()[i] == c).count())
                .collect();
            if per.iter().max().unwrap() - per.iter().min().unwrap() > 1 {
                problems.push(format!("seed {seed}: class {c} imbalance {per:?}"));
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "5 seeds x 4 losses, 10 folds".into()
        } else {
            problems.join("; ")
        },
    )
}

fn benchmark() -> Outcome {
    let started = Instant::now();
    let mut base = ExperimentConfig {
        dataset: DatasetSource::Synthetic {
            params: SynthParams {
                classes: 8,
                per_class: 80,
                dim: 16,
                separation: 4.0,
                spread: 1.5,
            },
            seed: None,
        },
        knn_k: 5,
        folds: 10,
        ..Default::default()
    };
    base.model.embedding_dim = 32;
    base.training.epochs = 10;
    let hyper = LossHyper::default();
    let arms = ["constellation:3", "triplet", "contrastive", "npair"]
        .map(|a| parse_arm(a, &hyper).unwrap())
        .to_vec();
    let report = match run_benchmark(&BenchmarkConfig {
        base,
        arms,
        seeds: (0..5).collect(),
    }) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let secs = started.elapsed().as_secs_f64();
    let no_nan = report.seeds.iter().all(|s| s.arms.iter().all(|a| !a.any_non_finite));
    let mut beats_untrained = 0;
    let mut beats_triplet = 0;
    let mut min_acc = f64::INFINITY;
    let mut lines = Vec::new();
    for s in &report.seeds {
        let c = s.arm("constellation:3").unwrap();
        let t = s.arm("triplet").unwrap();
        beats_untrained += usize::from(c.summary.silhouette.mean > c.untrained_summary.silhouette.mean);
        beats_triplet += usize::from(c.summary.silhouette.mean >= t.summary.silhouette.mean);
        min_acc = min_acc.min(c.summary.accuracy.mean);
        lines.push(format!(
            "seed {}: constellation sil {:.4} (untrained {:.4}) acc {:.4}, triplet sil {:.4}",
            s.seed,
            c.summary.silhouette.mean,
            c.untrained_summary.silhouette.mean,
            c.summary.accuracy.mean,
            t.summary.silhouette.mean
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    let parts = [
        ("a", no_nan, format!("no NaN: {no_nan}")),
        (
            "b",
            beats_untrained == 5,
            format!("beats untrained {beats_untrained}/5"),
        ),
        (
            "c",
            beats_triplet >= 4,
            format!("silhouette >= triplet {beats_triplet}/5"),
        ),
        ("d", min_acc >= 0.95, format!("min constellation accuracy {min_acc:.4}")),
        ("time", secs < 300.0, format!("{secs:.1}s")),
    ];
    let failed: Vec<&str> = parts.iter().filter(|p| !p.1).map(|p| p.0).collect();
    let detail = parts
        .iter()
        .map(|p| format!("({}) {}", p.0, p.2))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(failed.is_empty(), detail)
}

fn strip_wall_clock(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("wall_clock_seconds");
            map.values_mut().for_each(strip_wall_clock);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_wall_clock),
        _ => {}
    }
}

fn comparable(path: &Path) -> Vec<u8> {
    let bytes = std::fs::read(path).unwrap();
    if path.extension().is_some_and(|e| e == "json") {
        let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        strip_wall_clock(&mut v);
        serde_json::to_vec_pretty(&v).unwrap()
    } else {
        bytes
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let small = [
        "--hidden",
        "16",
        "--embedding-dim",
        "8",
        "--epochs",
        "2",
        "--folds",
        "3",
    ];
    let synth = ["--classes", "4", "--per-class", "12", "--dim", "6"];
    let mut commands: Vec<(String, Vec<String>, Vec<String>)> = Vec::new();
    let mut add = |name: &str, args: Vec<&str>, outs: Vec<String>| {
        commands.push((name.to_string(), args.into_iter().map(String::from).collect(), outs));
    };
    let (data, ckpt) = (p("data.csv"), p("model.json"));
    add(
        "gen-data",
        [vec!["gen-data", "--seed", "3", "--out", &data], synth.to_vec()].concat(),
        vec![data.clone()],
    );
    let train_out = p("train.json");
    add(
        "train",
        [
            vec![
                "train",
                "--seed",
                "3",
                "--data",
                &data,
                "--checkpoint",
                &ckpt,
                "--out",
                &train_out,
            ],
            small.to_vec(),
        ]
        .concat(),
        vec![ckpt.clone(), train_out.clone()],
    );
    let exp_out = p("experiment.json");
    add(
        "experiment",
        [
            vec!["experiment", "--seed", "3", "--loss", "triplet", "--out", &exp_out],
            synth.to_vec(),
            small.to_vec(),
        ]
        .concat(),
        vec![exp_out.clone()],
    );
    let eval_out = p("eval.json");
    add(
        "eval",
        vec![
            "eval",
            "--seed",
            "3",
            "--checkpoint",
            &ckpt,
            "--data",
            &data,
            "--out",
            &eval_out,
        ],
        vec![eval_out.clone()],
    );
    let grad_out = p("gradcheck.json");
    add(
        "gradcheck",
        vec!["gradcheck", "--seed", "3", "--instances", "3", "--out", &grad_out],
        vec![grad_out.clone()],
    );
    let bench_out = p("benchmark.json");
    add(
        "benchmark",
        [
            vec![
                "benchmark",
                "--seed",
                "3",
                "--seeds",
                "2",
                "--arms",
                "constellation:2,triplet",
                "--out",
                &bench_out,
            ],
            synth.to_vec(),
            small.to_vec(),
        ]
        .concat(),
        vec![bench_out.clone()],
    );
    let proj_out = p("scatter.csv");
    add(
        "project",
        vec![
            "project",
            "--seed",
            "3",
            "--checkpoint",
            &ckpt,
            "--data",
            &data,
            "--out",
            &proj_out,
        ],
        vec![proj_out.clone()],
    );

    let exe = env!("CARGO_BIN_EXE_metric-embed");
    let mut first = Vec::new();
    let mut failures = Vec::new();
    for round in 0..2 {
        for (name, args, outs) in &commands {
            let status = Command::new(exe).args(args).output().unwrap();
            if !status.status.success() {
                failures.push(format!(
                    "{name} exited {:?}: {}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stderr)
                ));
                continue;
            }
            for out in outs {
                let bytes = comparable(Path::new(out));
                if round == 0 {
                    first.push((out.clone(), bytes));
                } else if first.iter().find(|(o, _)| o == out).map(|(_, b)| b) != Some(&bytes) {
                    failures.push(format!("{name}: {out} differs between runs"));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} commands byte-identical across reruns", commands.len())
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("1 gradient correctness", gradients),
        ("2 closed-form spot values", spot_values),
        ("3 mining oracle equivalence", mining),
        ("4 metric oracle equivalence", metrics),
        ("5 protocol fidelity", protocol),
        ("6 desk-scale ordering", benchmark),
        ("7 CLI determinism", cli_determinism),
    ];
    let mut all = true;
    for (name, run) in criteria {
        let o = run();
        all &= o.passed;
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
