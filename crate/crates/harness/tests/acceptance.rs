//! Acceptance criteria, one PASS/FAIL line each.
//!
//! The MNIST criteria read the dataset from `$NEUROLIFE_DATA_DIR` or the
//! workspace `data/mnist` (see `neurolife mnist-fetch`). Outputs are kept in
//! the cargo test scratch directory for inspection.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use harness::checks::{self, CheckReport};
use harness::config::{DataConfig, DATA_DIR_ENV};
use harness::experiment::{mean_std, ExperimentData};
use harness::{run_experiment_with, ExperimentConfig, ExperimentKind, ManifestSummary, Preset};
use neurolife::Method;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn mnist_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"),
    }
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

/// Default hyperparameters on a 10000-image training subset and 1000 test images.
fn mnist_config(
    kind: ExperimentKind,
    preset: Preset,
    seeds: std::ops::RangeInclusive<u64>,
    name: &str,
) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        architecture: harness::Architecture::Preset(preset),
        seeds: seeds.collect(),
        data: DataConfig::Mnist {
            dir: Some(mnist_dir()),
            train_subset: 10_000,
            eval_subset: 1000,
        },
        stats_subset: 10_000,
        output_dir: out_dir(name),
        ..Default::default()
    }
}

fn run(config: &ExperimentConfig, data: &ExperimentData) -> Result<ManifestSummary, String> {
    let summary = run_experiment_with(config, data).map_err(|e| e.to_string())?;
    if !summary.complete {
        return Err(format!("seed failures: {:?}", summary.failures));
    }
    Ok(summary)
}

fn from_check(report: CheckReport, limit: Option<Duration>) -> Outcome {
    let within = limit.is_none_or(|l| report.elapsed < l);
    let mut detail = report.detail;
    if let Some(l) = limit {
        detail.push_str(&format!("; runtime limit {}s", l.as_secs()));
    }
    Outcome {
        name: report.name,
        passed: report.passed && within,
        detail,
        elapsed: report.elapsed,
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.4}"))
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, e));
    Outcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Efficiency-on-loss-change slopes for N1 (A1 and A3 asserted positive) and
/// the least-efficient-neuron comparison, from one set of ten scans.
fn scan_criteria(data: &ExperimentData) -> Vec<Outcome> {
    let start = Instant::now();
    let mut config = mnist_config(ExperimentKind::Scan, Preset::N1, 1..=10, "scan_n1");
    config.scan.methods = vec![Method::A1, Method::A3];
    config.eval_every = 0;
    let summary = match run(&config, data) {
        Ok(s) => s,
        Err(e) => {
            return ["efficiency slope trend", "least-efficient removal cost"]
                .into_iter()
                .map(|name| Outcome {
                    name,
                    passed: false,
                    detail: e.clone(),
                    elapsed: start.elapsed(),
                })
                .collect()
        }
    };
    let elapsed = start.elapsed();
    let slope = |m| summary.results.scan(m).and_then(|s| s.fit).map(|f| f.slope);
    let (a1, a3) = (slope(Method::A1), slope(Method::A3));
    let pearson_a1 = summary.results.scan(Method::A1).and_then(|s| s.pearson);
    let slopes = Outcome {
        name: "efficiency slope trend",
        passed: a1.is_some_and(|b| b > 0.0) && a3.is_some_and(|b| b > 0.0),
        detail: format!(
            "N1, 10 seeds x 5000 steps, pooled OLS slope A1 {}, A3 {} (both must be > 0); A1 pearson {}",
            show(a1),
            show(a3),
            show(pearson_a1)
        ),
        elapsed,
    };
    let a1_seeds = &summary.results.scan(Method::A1).expect("A1 scanned").seeds;
    let below = a1_seeds
        .iter()
        .filter(|s| matches!((s.least_efficient_delta, s.layer_mean_delta), (Some(l), Some(m)) if l < m))
        .count();
    let least = Outcome {
        name: "least-efficient removal cost",
        passed: below >= 8,
        detail: format!(
            "A1 least-efficient neuron's loss change below the layer mean in {below}/{} seeds (need >= 8)",
            a1_seeds.len()
        ),
        elapsed: Duration::ZERO,
    };
    vec![slopes, least]
}

/// A2 slope on N3, reported only.
fn a2_report(data: &ExperimentData) -> String {
    let mut config = mnist_config(ExperimentKind::Scan, Preset::N3, 1..=3, "scan_n3_a2");
    config.scan.methods = vec![Method::A2];
    config.eval_every = 0;
    match run(&config, data) {
        Ok(s) => {
            let scan = s.results.scan(Method::A2).expect("A2 scanned");
            format!(
                "N3 A2 over 3 seeds: slope {}, pearson {}",
                show(scan.fit.map(|f| f.slope)),
                show(scan.pearson)
            )
        }
        Err(e) => format!("N3 A2 scan failed: {e}"),
    }
}

/// Combined death-then-replication against plain training on N4.
fn combined_criterion(data: &ExperimentData) -> Outcome {
    timed("combined schedule non-inferiority", || {
        let seeds = 1..=8;
        let combined = mnist_config(ExperimentKind::Combined, Preset::N4, seeds.clone(), "combined_n4");
        let mut baseline = mnist_config(ExperimentKind::Combined, Preset::N4, seeds, "baseline_n4");
        baseline.lifecycle.cutoff = 0.0;
        let c = run(&combined, data)?;
        let b = run(&baseline, data)?;
        let cv: Vec<f64> = c.results.final_loss.iter().map(|v| v.value).collect();
        let bv: Vec<f64> = b.results.final_loss.iter().map(|v| v.value).collect();
        let (cm, cs) = mean_std(&cv).ok_or("no combined runs")?;
        let (bm, bs) = mean_std(&bv).ok_or("no baseline runs")?;
        let (nc, nb) = (cv.len() as f64, bv.len() as f64);
        let pooled_sd = (((nc - 1.0) * cs * cs + (nb - 1.0) * bs * bs) / (nc + nb - 2.0)).sqrt();
        let stderr = pooled_sd * (1.0 / nc + 1.0 / nb).sqrt();
        let paired: Vec<f64> = bv.iter().zip(&cv).map(|(b, c)| b - c).collect();
        let wins = paired.iter().filter(|d| **d > 0.0).count();
        let effect = if pooled_sd > 0.0 { (bm - cm) / pooled_sd } else { 0.0 };
        let affected: Vec<String> = c
            .results
            .interventions
            .iter()
            .filter(|i| i.seed == 1)
            .map(|i| format!("{}:{}", i.step, i.removed))
            .collect();
        Ok((
            cm <= bm + stderr,
            format!(
                "N4, 8 seed pairs x 5000 steps: combined {cm:.5} vs baseline {bm:.5} (pooled stderr {stderr:.5}); \
                 effect size d = {effect:.3}, combined lower in {wins}/8 pairs; seed 1 removals per intervention [{}]",
                affected.join(" ")
            ),
        ))
    })
}

/// Replication variants after training, reported only.
fn pdf_criterion(data: &ExperimentData) -> Outcome {
    timed("replication variant ordering (reported)", || {
        let mut config = mnist_config(ExperimentKind::Pdf, Preset::N1, 1..=4, "pdf_n1");
        config.eval_every = 0;
        let s = run(&config, data)?;
        let cell = |rule: &str| {
            s.results
                .pdf_cell(rule, 1000)
                .map(|c| c.mean_delta)
                .ok_or_else(|| format!("missing {rule} cell"))
        };
        let values = ["B1", "B2", "B3", "B4", "B5"]
            .iter()
            .map(|r| cell(r).map(|v| format!("{r} {v:.5}")))
            .collect::<Result<Vec<_>, _>>()?;
        let (b1, b3) = (cell("B1")?, cell("B3")?);
        Ok((
            true,
            format!(
                "N1, 4 seeds, mean loss change 1000 steps after replication: {}; B1 {} B3",
                values.join(", "),
                if b1 < b3 {
                    "below (sharp splits cheaper)"
                } else {
                    "not below (sharp splits not cheaper)"
                }
            ),
        ))
    })
}

/// Same config twice, and once more from the written manifest.
fn determinism_criterion(data: &ExperimentData) -> Outcome {
    timed("determinism", || {
        let mut config = mnist_config(ExperimentKind::Combined, Preset::N1, 1..=2, "determinism_a");
        config.hyper.steps = 300;
        config.lifecycle.period = 100;
        config.lifecycle.cutoff = f64::INFINITY;
        let first = run(&config, data)?;
        let mut second_cfg = config.clone();
        second_cfg.output_dir = out_dir("determinism_b");
        let second = run(&second_cfg, data)?;
        let manifest = std::fs::read_to_string(first.output_dir.join("manifest.json")).map_err(|e| e.to_string())?;
        let mut third_cfg = ExperimentConfig::from_json(&manifest).map_err(|e| e.to_string())?;
        third_cfg.output_dir = out_dir("determinism_c");
        let third = run(&third_cfg, data)?;
        let mut identical = first.files == second.files && first.files == third.files;
        for f in &first.files {
            let bytes = |dir: &PathBuf| std::fs::read(dir.join(&f.name)).map_err(|e| e.to_string());
            let a = bytes(&first.output_dir)?;
            identical &= a == bytes(&second.output_dir)? && a == bytes(&third.output_dir)?;
        }
        let surgeries = first.results.interventions.len();
        Ok((
            identical && surgeries > 0,
            format!(
                "{} CSVs byte-identical across two runs and a manifest rerun; {surgeries} interventions exercised",
                first.files.len()
            ),
        ))
    })
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut emit = |o: Outcome| {
        println!(
            "{} {}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail,
            o.elapsed.as_secs_f64()
        );
        outcomes.push(o.passed);
    };
    let minute = Some(Duration::from_secs(60));
    emit(from_check(checks::check_gradients(), minute));
    emit(from_check(checks::check_replication(), None));
    emit(from_check(checks::check_death_exactness(), None));
    emit(from_check(checks::check_efficiency_identity(), None));
    emit(from_check(checks::check_jacobi(), minute));

    let data_config = mnist_config(ExperimentKind::Train, Preset::N1, 1..=1, "unused").data;
    match ExperimentData::load(&data_config) {
        Ok(data) => {
            for o in scan_criteria(&data) {
                emit(o);
            }
            println!("INFO efficiency slope trend: {}", a2_report(&data));
            emit(combined_criterion(&data));
            emit(pdf_criterion(&data));
            emit(determinism_criterion(&data));
        }
        Err(e) => {
            for name in [
                "efficiency slope trend",
                "least-efficient removal cost",
                "combined schedule non-inferiority",
                "replication variant ordering (reported)",
                "determinism",
            ] {
                emit(Outcome {
                    name,
                    passed: false,
                    detail: e.to_string(),
                    elapsed: Duration::ZERO,
                });
            }
        }
    }
    let failed = outcomes.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
