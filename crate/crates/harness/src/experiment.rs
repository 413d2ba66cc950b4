//! Multi-seed experiment orchestration and report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use neurolife::lifecycle::run_with_lifecycle;
use neurolife::oracle::{mean_loss, SCAN_CSV_HEADER};
use neurolife::surgery::resize_after_replication;
use neurolife::trainer::{EventKind, StepRecord, SurgeryEvent};
use neurolife::{
    apply_death, collect_stats, efficiency_for, evaluate, fit_slope, load_mnist_dir, pearson, relation_for, scan_layer,
    synthetic_duplicate_dataset, train, Dataset, DeathPlan, EvalHook, Hyperparams, LayerScan, Method, Network,
    ReplicationPlan, RunRecord, SlopeFit, Split, SplitRule, Trainer,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{resolve_data_dir, DataConfig, ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};

/// Training and evaluation sets for one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: Dataset,
    pub eval: Dataset,
}

impl ExperimentData {
    pub fn load(config: &DataConfig) -> Result<Self> {
        match config {
            DataConfig::Mnist {
                dir,
                train_subset,
                eval_subset,
            } => {
                let dir = resolve_data_dir(dir.as_deref());
                let load = |split| {
                    load_mnist_dir(&dir, split).map_err(|e| {
                        HarnessError::Io(format!(
                            "cannot load MNIST from {} ({e}); run `neurolife mnist-fetch --dir {}`",
                            dir.display(),
                            dir.display()
                        ))
                    })
                };
                Ok(Self {
                    train: load(Split::Train)?.head(*train_subset),
                    eval: load(Split::Test)?.head(*eval_subset),
                })
            }
            DataConfig::Synthetic {
                dim,
                samples,
                eval_samples,
                seed,
            } => {
                let all = synthetic_duplicate_dataset(*dim, samples + eval_samples, *seed)?;
                let train: Vec<usize> = (0..*samples).collect();
                let eval: Vec<usize> = (*samples..samples + eval_samples).collect();
                Ok(Self {
                    train: all.select(&train),
                    eval: all.select(&eval),
                })
            }
        }
    }

    /// SHA-256 over the inputs and labels of both sets.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for ds in [&self.train, &self.eval] {
            h.update((ds.len() as u64).to_le_bytes());
            for (x, y) in ds.iter() {
                for v in x {
                    h.update(v.to_le_bytes());
                }
                h.update((y as u64).to_le_bytes());
            }
        }
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// The replication variants compared by the `pdf` experiment.
pub const PDF_RULES: [(&str, Option<SplitRule>); 5] = [
    (
        "B1",
        Some(SplitRule::Beta {
            alpha: 0.01,
            beta: 0.01,
        }),
    ),
    ("B2", Some(SplitRule::Beta { alpha: 1.0, beta: 1.0 })),
    (
        "B3",
        Some(SplitRule::Beta {
            alpha: 100.0,
            beta: 100.0,
        }),
    ),
    ("B4", Some(SplitRule::RandomNeuron { scale: 1.0 })),
    ("B5", None),
];

pub const PDF_CSV_HEADER: &str = "seed,rule,horizon,loss_before,loss_after,delta_loss\n";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfRow {
    pub seed: u64,
    pub rule: &'static str,
    pub horizon: u64,
    pub loss_before: f64,
    pub loss_after: f64,
    pub delta_loss: f64,
}

/// Everything one seed produces.
#[derive(Debug, Clone, Default)]
pub struct SeedOutput {
    pub seed: u64,
    pub record: RunRecord,
    pub scans: Vec<(Method, LayerScan)>,
    pub pdf: Vec<PdfRow>,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedValue {
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedScan {
    pub seed: u64,
    pub rows: usize,
    pub skipped: usize,
    pub least_efficient_delta: Option<f64>,
    pub layer_mean_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodScan {
    pub method: Method,
    pub fit: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    pub pearson: Option<f64>,
    pub seeds: Vec<SeedScan>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfCell {
    pub rule: &'static str,
    pub horizon: u64,
    pub n: usize,
    pub mean_delta: f64,
    pub std_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intervention {
    pub seed: u64,
    pub step: u64,
    pub removed: usize,
}

/// Aggregated per-kind results, also echoed in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Results {
    /// Mean of the trailing `smooth_evals` evaluation losses per seed.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub final_loss: Vec<SeedValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scans: Vec<MethodScan>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pdf: Vec<PdfCell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub interventions: Vec<Intervention>,
}

impl Results {
    pub fn scan(&self, method: Method) -> Option<&MethodScan> {
        self.scans.iter().find(|s| s.method == method)
    }

    pub fn pdf_cell(&self, rule: &str, horizon: u64) -> Option<&PdfCell> {
        self.pdf.iter().find(|c| c.rule == rule && c.horizon == horizon)
    }

    pub fn mean_final_loss(&self) -> Option<f64> {
        mean_std(&self.final_loss.iter().map(|v| v.value).collect::<Vec<_>>()).map(|(m, _)| m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub exit_code: i32,
    pub error: String,
}

/// What a finished experiment wrote, and its aggregated results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestSummary {
    pub output_dir: PathBuf,
    pub complete: bool,
    pub failures: Vec<SeedFailure>,
    pub files: Vec<FileDigest>,
    pub results: Results,
}

impl ManifestSummary {
    pub fn file(&self, name: &str) -> Option<&FileDigest> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

/// Training state that can be advanced, operated on, and cloned mid-run.
#[derive(Clone)]
struct Session {
    net: Network,
    trainer: Trainer,
    record: RunRecord,
    step: u64,
}

impl Session {
    fn new(net: Network, data: &Dataset, hyper: Hyperparams) -> Result<Self> {
        let trainer = Trainer::new(&net, data, hyper)?;
        Ok(Self {
            net,
            trainer,
            record: RunRecord::default(),
            step: 0,
        })
    }

    fn advance(&mut self, n: u64, data: &Dataset, eval: Option<&EvalHook<'_>>) -> Result<()> {
        let loss_kind = self.trainer.hyper().loss;
        for _ in 0..n {
            let train_loss = self.trainer.step(&mut self.net, data, self.step)?;
            self.step += 1;
            let (eval_loss, eval_acc) = match eval {
                Some(h) if h.due(self.step) => {
                    let e = evaluate(&self.net, h.data, loss_kind)?;
                    (Some(e.loss), Some(e.accuracy))
                }
                _ => (None, None),
            };
            self.record.push_step(StepRecord {
                step: self.step,
                train_loss,
                eval_loss,
                eval_acc,
            })?;
        }
        Ok(())
    }

    fn replicate(&mut self, plan: &ReplicationPlan, label: &str) -> Result<usize> {
        let child = plan.apply(&mut self.net)?;
        resize_after_replication(self.trainer.velocity_mut(), plan.layer);
        self.record.events.push(SurgeryEvent {
            step: self.step,
            kind: EventKind::Replicate,
            layer: plan.layer,
            neuron: plan.parent,
            detail: format!("{label}{} child={child}", plan.rule),
        });
        Ok(child)
    }
}

/// Mean of the trailing `window` evaluation losses, or of the trailing
/// training losses when nothing was evaluated.
pub fn final_smoothed_loss(record: &RunRecord, window: usize) -> f64 {
    let window = window.max(1);
    let evals: Vec<f64> = record.eval_series().into_iter().map(|(_, l)| l).collect();
    let series: Vec<f64> = if evals.is_empty() {
        record.steps.iter().map(|s| s.train_loss).collect()
    } else {
        evals
    };
    let tail = &series[series.len().saturating_sub(window)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn most_efficient(values: &[f64]) -> Option<usize> {
    (0..values.len())
        .filter(|&k| values[k].is_finite())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
}

/// Runs the full pipeline of `config.kind` for one seed.
pub fn run_seed(config: &ExperimentConfig, data: &ExperimentData, seed: u64) -> Result<SeedOutput> {
    let hyper = config.hyper.hyperparams(seed);
    let net = Network::init_uniform(&config.layer_sizes(), seed)?;
    let hook = EvalHook {
        every: config.eval_every,
        data: &data.eval,
    };
    let eval = (config.eval_every > 0).then_some(&hook);
    let stats_config = config.stats_config();
    let mut out = SeedOutput {
        seed,
        ..Default::default()
    };
    let train_set = &data.train;

    match config.kind {
        ExperimentKind::Train => {
            let mut net = net;
            out.record = train(&mut net, train_set, &hyper, eval)?;
        }
        ExperimentKind::Combined => {
            let mut net = net;
            out.record = run_with_lifecycle(&mut net, train_set, &hyper, &config.lifecycle, &stats_config, eval)?;
        }
        ExperimentKind::Scan => {
            let mut net = net;
            out.record = train(&mut net, train_set, &hyper, eval)?;
            for &method in &config.scan.methods {
                let scan = scan_layer(&net, train_set, config.scan.layer, method, hyper.loss, &stats_config)?;
                out.scans.push((method, scan));
            }
        }
        ExperimentKind::PruneOnce => {
            let s = &config.surgery;
            let mut session = Session::new(net, train_set, hyper)?;
            session.advance(hyper.steps, train_set, eval)?;
            let stats_set = train_set.head(config.stats_subset);
            for _ in 0..s.count {
                let (stats, down) = collect_stats(&session.net, train_set, s.layer, &stats_config)?;
                let w = session.net.weights(s.layer);
                let report = efficiency_for(s.method, &stats, &down, w)?;
                let k = report
                    .least_efficient()
                    .ok_or_else(|| HarnessError::Numerical("no neuron has a finite efficiency".into()))?;
                let relation = relation_for(s.method, k, &stats, &down, w)?;
                let before = mean_loss(&session.net, &stats_set, hyper.loss)?;
                apply_death(&mut session.net, &DeathPlan::new(relation, &stats))?;
                neurolife::surgery::resize_after_death(session.trainer.velocity_mut(), s.layer, k);
                let after = mean_loss(&session.net, &stats_set, hyper.loss)?;
                session.record.events.push(SurgeryEvent {
                    step: session.step,
                    kind: EventKind::Death,
                    layer: s.layer,
                    neuron: k,
                    detail: format!(
                        "{} efficiency={} delta_loss={}",
                        s.method,
                        report.values[k],
                        after - before
                    ),
                });
            }
            session.advance(s.post_steps, train_set, eval)?;
            out.record = session.record;
        }
        ExperimentKind::Replicate => {
            let s = &config.surgery;
            let mut session = Session::new(net, train_set, hyper)?;
            session.advance(hyper.steps, train_set, eval)?;
            let (stats, down) = collect_stats(&session.net, train_set, s.layer, &stats_config)?;
            let report = efficiency_for(s.method, &stats, &down, session.net.weights(s.layer))?;
            let parents: Vec<usize> = report.descending().into_iter().take(s.count).collect();
            for p in parents {
                let plan = ReplicationPlan {
                    layer: s.layer,
                    parent: p,
                    rule: s.rule,
                    seed,
                };
                session.replicate(&plan, "")?;
            }
            session.advance(s.post_steps, train_set, eval)?;
            out.record = session.record;
        }
        ExperimentKind::Pdf => {
            let p = &config.pdf;
            let mut base = Session::new(net, train_set, hyper)?;
            base.advance(hyper.steps, train_set, eval)?;
            let stats_set = train_set.head(config.stats_subset);
            let (stats, down) = collect_stats(&base.net, train_set, p.layer, &stats_config)?;
            let report = efficiency_for(p.method, &stats, &down, base.net.weights(p.layer))?;
            let parent = most_efficient(&report.values)
                .ok_or_else(|| HarnessError::Numerical("no neuron has a finite efficiency".into()))?;
            let loss_before = mean_loss(&base.net, &stats_set, hyper.loss)?;
            let mut horizons = p.horizons.clone();
            horizons.sort_unstable();
            horizons.dedup();
            let mut events = Vec::new();
            for (label, rule) in PDF_RULES {
                let mut s = base.clone();
                if let Some(rule) = rule {
                    let plan = ReplicationPlan {
                        layer: p.layer,
                        parent,
                        rule,
                        seed,
                    };
                    s.replicate(&plan, &format!("{label} "))?;
                    events.push(s.record.events.pop().expect("event just recorded"));
                }
                let mut done = 0;
                for &h in &horizons {
                    // Continuation steps are not recorded in the per-seed run file.
                    s.advance(h - done, train_set, None)?;
                    done = h;
                    let loss_after = mean_loss(&s.net, &stats_set, hyper.loss)?;
                    out.pdf.push(PdfRow {
                        seed,
                        rule: label,
                        horizon: h,
                        loss_before,
                        loss_after,
                        delta_loss: loss_after - loss_before,
                    });
                }
            }
            out.record = base.record;
            out.record.events.extend(events);
        }
    }
    out.final_loss = final_smoothed_loss(&out.record, config.smooth_evals);
    Ok(out)
}

fn scan_csv(seed: u64, step: u64, scans: &[(Method, LayerScan)]) -> String {
    let mut s = String::from(SCAN_CSV_HEADER);
    for (_, scan) in scans {
        scan.write_csv_rows(&mut s, seed, step);
    }
    s
}

fn pdf_rows_csv<'a>(rows: impl IntoIterator<Item = &'a PdfRow>) -> String {
    let mut s = String::from(PDF_CSV_HEADER);
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.seed, r.rule, r.horizon, r.loss_before, r.loss_after, r.delta_loss
        );
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Mean and standard deviation across seeds at every recorded step.
pub fn loss_summary_csv(outputs: &[SeedOutput]) -> String {
    let mut s = String::from("step,n,train_loss_mean,train_loss_std,eval_loss_mean,eval_loss_std\n");
    let len = outputs.iter().map(|o| o.record.steps.len()).max().unwrap_or(0);
    for i in 0..len {
        let rows: Vec<&StepRecord> = outputs.iter().filter_map(|o| o.record.steps.get(i)).collect();
        let train: Vec<f64> = rows.iter().map(|r| r.train_loss).collect();
        let eval: Vec<f64> = rows.iter().filter_map(|r| r.eval_loss).collect();
        let (tm, ts) = mean_std(&train).expect("at least one row");
        let e = mean_std(&eval);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            rows[0].step,
            rows.len(),
            tm,
            ts,
            fmt_opt(e.map(|v| v.0)),
            fmt_opt(e.map(|v| v.1))
        );
    }
    s
}

fn aggregate(config: &ExperimentConfig, outputs: &[SeedOutput]) -> Results {
    let mut results = Results::default();
    if matches!(
        config.kind,
        ExperimentKind::Train | ExperimentKind::Combined | ExperimentKind::PruneOnce | ExperimentKind::Replicate
    ) {
        results.final_loss = outputs
            .iter()
            .map(|o| SeedValue {
                seed: o.seed,
                value: o.final_loss,
            })
            .collect();
    }
    if config.kind == ExperimentKind::Combined {
        for o in outputs {
            let mut steps: Vec<u64> = o
                .record
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Death)
                .map(|e| e.step)
                .collect();
            steps.dedup();
            for step in steps {
                let removed = o
                    .record
                    .events
                    .iter()
                    .filter(|e| e.kind == EventKind::Death && e.step == step)
                    .count();
                results.interventions.push(Intervention {
                    seed: o.seed,
                    step,
                    removed,
                });
            }
        }
    }
    for &method in &config.scan.methods {
        if config.kind != ExperimentKind::Scan {
            break;
        }
        let mut points = Vec::new();
        let mut seeds = Vec::new();
        for o in outputs {
            for (m, scan) in &o.scans {
                if *m != method {
                    continue;
                }
                points.extend(scan.rows.iter().map(|r| (r.delta_loss, r.efficiency)));
                seeds.push(SeedScan {
                    seed: o.seed,
                    rows: scan.rows.len(),
                    skipped: scan.skipped.len(),
                    least_efficient_delta: scan.least_efficient().map(|r| r.delta_loss),
                    layer_mean_delta: scan.mean_delta_loss(),
                });
            }
        }
        let fit = fit_slope(&points);
        results.scans.push(MethodScan {
            method,
            fit: fit.as_ref().ok().copied(),
            fit_error: fit.err().map(|e| e.to_string()),
            pearson: pearson(&points),
            seeds,
        });
    }
    if config.kind == ExperimentKind::Pdf {
        let mut horizons = config.pdf.horizons.clone();
        horizons.sort_unstable();
        horizons.dedup();
        for (rule, _) in PDF_RULES {
            for &h in &horizons {
                let deltas: Vec<f64> = outputs
                    .iter()
                    .flat_map(|o| &o.pdf)
                    .filter(|r| r.rule == rule && r.horizon == h)
                    .map(|r| r.delta_loss)
                    .collect();
                if let Some((mean, std)) = mean_std(&deltas) {
                    results.pdf.push(PdfCell {
                        rule,
                        horizon: h,
                        n: deltas.len(),
                        mean_delta: mean,
                        std_delta: std,
                    });
                }
            }
        }
    }
    results
}

fn git_commit() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<FileDigest>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    files.push(FileDigest {
        name: name.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
        bytes: contents.len(),
    });
    Ok(())
}

/// Runs every seed, writes the per-seed CSVs, `summary.csv` and
/// `manifest.json` into `config.output_dir`, and returns what was written.
/// A failing seed is recorded and the remaining seeds still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ManifestSummary> {
    config.validate()?;
    let data = ExperimentData::load(&config.data)?;
    run_experiment_with(config, &data)
}

/// [`run_experiment`] with preloaded data.
pub fn run_experiment_with(config: &ExperimentConfig, data: &ExperimentData) -> Result<ManifestSummary> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files = Vec::new();
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for &seed in &config.seeds {
        match run_seed(config, data, seed) {
            Ok(o) => {
                write_file(dir, &format!("run_{seed}.csv"), &o.record.steps_csv(), &mut files)?;
                write_file(dir, &format!("events_{seed}.csv"), &o.record.events_csv(), &mut files)?;
                if config.kind == ExperimentKind::Scan {
                    write_file(
                        dir,
                        &format!("scan_{seed}.csv"),
                        &scan_csv(seed, config.hyper.steps, &o.scans),
                        &mut files,
                    )?;
                }
                outputs.push(o);
            }
            Err(HarnessError::Config(m)) => return Err(HarnessError::Config(m)),
            Err(e) => failures.push(SeedFailure {
                seed,
                exit_code: e.exit_code(),
                error: e.to_string(),
            }),
        }
    }
    let summary = match config.kind {
        ExperimentKind::Scan => {
            let mut s = String::from(SCAN_CSV_HEADER);
            for o in &outputs {
                for (_, scan) in &o.scans {
                    scan.write_csv_rows(&mut s, o.seed, config.hyper.steps);
                }
            }
            s
        }
        ExperimentKind::Pdf => pdf_rows_csv(outputs.iter().flat_map(|o| &o.pdf)),
        _ => loss_summary_csv(&outputs),
    };
    write_file(dir, "summary.csv", &summary, &mut files)?;
    let results = aggregate(config, &outputs);
    let complete = failures.is_empty();

    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "tool": "neurolife",
        "version": env!("CARGO_PKG_VERSION"),
        "git_commit": git_commit(),
        "created_unix": created,
        "config": config,
        "seeds": config.seeds,
        "data": {
            "train_samples": data.train.len(),
            "eval_samples": data.eval.len(),
            "sha256": data.fingerprint(),
        },
        "complete": complete,
        "failures": failures,
        "files": files,
        "results": results,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(ManifestSummary {
        output_dir: dir.clone(),
        complete,
        failures,
        files,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn final_loss_uses_trailing_evaluations() {
        let mut r = RunRecord::default();
        for step in 1..=6 {
            r.push_step(StepRecord {
                step,
                train_loss: step as f64,
                eval_loss: (step % 2 == 0).then_some(10.0 * step as f64),
                eval_acc: None,
            })
            .unwrap();
        }
        assert_eq!(final_smoothed_loss(&r, 2), 50.0);
        let no_eval = RunRecord {
            steps: r.steps.iter().map(|s| StepRecord { eval_loss: None, ..*s }).collect(),
            events: vec![],
        };
        assert_eq!(final_smoothed_loss(&no_eval, 3), 5.0);
    }

    #[test]
    fn most_efficient_skips_infinite_and_prefers_low_index() {
        assert_eq!(most_efficient(&[1.0, 3.0, f64::INFINITY, 3.0]), Some(1));
        assert_eq!(most_efficient(&[f64::INFINITY]), None);
    }

    #[test]
    fn hex_digest_is_lowercase() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
