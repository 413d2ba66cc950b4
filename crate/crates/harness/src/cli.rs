//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use neurolife::Method;

use crate::checks;
use crate::config::{parse_split_rule, resolve_data_dir, Architecture, DataConfig, ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, ManifestSummary};
use crate::fetch::{fetch_mnist, DEFAULT_MIRROR};

#[derive(Debug, Parser)]
#[command(name = "neurolife", version, about = "Programmed death and replication of neurons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train networks and record loss curves.
    Train(Common),
    /// Train, then measure efficiency and removal cost of every neuron in a layer.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Efficiency methods (A1, A2, A3), comma separated.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        /// Hidden layer index (0 is the input layer).
        #[arg(long)]
        layer: Option<usize>,
    },
    /// Train, then remove the least efficient neurons.
    Prune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surgery: SurgeryArgs,
    },
    /// Train, then replicate the most efficient neurons.
    Grow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surgery: SurgeryArgs,
        /// Split rule: equal, random_bit, beta:A,B or random_neuron:SCALE.
        #[arg(long)]
        rule: Option<String>,
        /// Compare all replication variants over the given horizons instead.
        #[arg(long)]
        pdf: bool,
        /// Continuation horizons for --pdf, comma separated.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<u64>,
    },
    /// Train with periodic death-then-replication of one layer.
    Combined {
        #[command(flatten)]
        common: Common,
        /// Efficiency below which neurons die; `inf` removes up to the cap, 0 disables.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Steps between interventions.
        #[arg(long)]
        period: Option<u64>,
        /// Largest fraction of the layer removed per intervention.
        #[arg(long)]
        max_fraction: Option<f64>,
        /// Efficiency method ranking neurons for death (A1, A2, A3).
        #[arg(long)]
        death_method: Option<Method>,
        /// Alpha of the Beta split used for replication.
        #[arg(long)]
        split_alpha: Option<f64>,
        /// Beta of the Beta split used for replication.
        #[arg(long)]
        split_beta: Option<f64>,
        /// Hidden layer index (0 is the input layer).
        #[arg(long)]
        layer: Option<usize>,
    },
    /// Run the built-in correctness checks and print PASS/FAIL per check.
    Oracle {
        /// Accepted for uniformity with the other commands; unused.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Download MNIST into the dataset cache directory.
    MnistFetch {
        /// Accepted for uniformity; `data.dir` from it is used when --dir is absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target directory (default: $NEUROLIFE_DATA_DIR, else data/mnist).
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Base URL serving the gzipped IDX files.
        #[arg(long, default_value = DEFAULT_MIRROR)]
        mirror: String,
    },
}

/// Options shared by every experiment command; each overrides a config key.
#[derive(Debug, Args)]
struct Common {
    /// JSON config file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds as a comma list with optional inclusive ranges, e.g. `1,2,5-8`.
    #[arg(long)]
    seeds: Option<String>,
    /// Preset (N1..N4) or sizes such as 784-5-20-10.
    #[arg(long)]
    arch: Option<Architecture>,
    /// Training steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Momentum coefficient in [0, 1).
    #[arg(long)]
    momentum: Option<f64>,
    /// L2 weight decay on weights (not biases).
    #[arg(long)]
    l2: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Steps between held-out evaluations; 0 disables them.
    #[arg(long)]
    eval_every: Option<u64>,
    /// Training samples used for neuron statistics and removal costs.
    #[arg(long)]
    stats_subset: Option<usize>,
    /// MNIST directory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Number of leading MNIST training images used.
    #[arg(long)]
    train_subset: Option<usize>,
    /// Number of leading MNIST test images used for evaluation.
    #[arg(long)]
    eval_subset: Option<usize>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SurgeryArgs {
    /// Efficiency method ranking neurons (A1, A2, A3).
    #[arg(long)]
    method: Option<Method>,
    /// Number of neurons removed or replicated.
    #[arg(long)]
    count: Option<usize>,
    /// Hidden layer index (0 is the input layer).
    #[arg(long)]
    layer: Option<usize>,
    /// Training steps after the surgery.
    #[arg(long)]
    post_steps: Option<u64>,
}

/// Parses `1,2,5-8` into `[1, 2, 5, 6, 7, 8]`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || HarnessError::Config(format!("bad seed list {s:?}"));
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b || b - a >= 100_000 {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    /// Loads the config (or defaults), applies the overrides and sets the
    /// kind to `kind` unless the file already names one of `keep`.
    fn build(self, kind: ExperimentKind, keep: &[ExperimentKind]) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.config.is_none() || !keep.contains(&c.kind) {
            c.kind = kind;
        }
        if let Some(s) = &self.seeds {
            c.seeds = parse_seeds(s)?;
        }
        set(&mut c.architecture, self.arch);
        set(&mut c.hyper.steps, self.steps);
        set(&mut c.hyper.learning_rate, self.lr);
        set(&mut c.hyper.momentum, self.momentum);
        set(&mut c.hyper.l2, self.l2);
        set(&mut c.hyper.batch_size, self.batch_size);
        set(&mut c.eval_every, self.eval_every);
        set(&mut c.stats_subset, self.stats_subset);
        set(&mut c.output_dir, self.output);
        let data_override = self.data_dir.is_some() || self.train_subset.is_some() || self.eval_subset.is_some();
        match &mut c.data {
            DataConfig::Mnist {
                dir,
                train_subset,
                eval_subset,
            } => {
                if self.data_dir.is_some() {
                    *dir = self.data_dir;
                }
                set(train_subset, self.train_subset);
                set(eval_subset, self.eval_subset);
            }
            DataConfig::Synthetic { .. } if data_override => {
                return Err(HarnessError::Config(
                    "--data-dir/--train-subset/--eval-subset apply to MNIST data only".into(),
                ))
            }
            DataConfig::Synthetic { .. } => {}
        }
        Ok(c)
    }
}

impl SurgeryArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        set(&mut c.surgery.method, self.method);
        set(&mut c.surgery.count, self.count);
        set(&mut c.surgery.layer, self.layer);
        set(&mut c.surgery.post_steps, self.post_steps);
    }
}

fn config_for(command: Command) -> Result<ExperimentConfig> {
    let config = match command {
        Command::Train(common) => common.build(ExperimentKind::Train, &[])?,
        Command::Scan { common, method, layer } => {
            let mut c = common.build(ExperimentKind::Scan, &[])?;
            if !method.is_empty() {
                c.scan.methods = method;
            }
            set(&mut c.scan.layer, layer);
            c
        }
        Command::Prune { common, surgery } => {
            let mut c = common.build(ExperimentKind::PruneOnce, &[])?;
            surgery.apply(&mut c);
            c
        }
        Command::Grow {
            common,
            surgery,
            rule,
            pdf,
            horizons,
        } => {
            // A config file of kind `pdf` keeps that kind.
            let mut c = common.build(ExperimentKind::Replicate, &[ExperimentKind::Pdf])?;
            if pdf || c.kind == ExperimentKind::Pdf {
                c.kind = ExperimentKind::Pdf;
                set(&mut c.pdf.layer, surgery.layer);
                set(&mut c.pdf.method, surgery.method);
                if !horizons.is_empty() {
                    c.pdf.horizons = horizons;
                }
            } else {
                surgery.apply(&mut c);
                if let Some(r) = rule {
                    c.surgery.rule = parse_split_rule(&r)?;
                }
            }
            c
        }
        Command::Combined {
            common,
            cutoff,
            period,
            max_fraction,
            death_method,
            split_alpha,
            split_beta,
            layer,
        } => {
            let mut c = common.build(ExperimentKind::Combined, &[])?;
            let l = &mut c.lifecycle;
            set(&mut l.cutoff, cutoff);
            set(&mut l.period, period);
            set(&mut l.max_fraction, max_fraction);
            set(&mut l.death_method, death_method);
            set(&mut l.split_alpha, split_alpha);
            set(&mut l.split_beta, split_beta);
            set(&mut l.layer, layer);
            c
        }
        Command::Oracle { .. } | Command::MnistFetch { .. } => unreachable!("not an experiment"),
    };
    config.validate()?;
    Ok(config)
}

fn print_summary(summary: &ManifestSummary) {
    println!(
        "wrote {} files and manifest.json to {}",
        summary.files.len(),
        summary.output_dir.display()
    );
    let r = &summary.results;
    if let Some(mean) = r.mean_final_loss() {
        println!("mean final smoothed loss over {} seeds: {mean}", r.final_loss.len());
    }
    for s in &r.scans {
        match &s.fit {
            Some(f) => println!(
                "{}: slope {} intercept {} over {} neurons, pearson {}",
                s.method,
                f.slope,
                f.intercept,
                f.n,
                s.pearson.map(|p| p.to_string()).unwrap_or_else(|| "n/a".into())
            ),
            None => println!("{}: no fit ({})", s.method, s.fit_error.as_deref().unwrap_or("")),
        }
    }
    for c in &r.pdf {
        println!(
            "{} after {} steps: mean delta loss {} (n={})",
            c.rule, c.horizon, c.mean_delta, c.n
        );
    }
    for f in &summary.failures {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Oracle { .. } => {
            let reports = checks::run_all();
            for r in &reports {
                println!("{r}");
            }
            Ok(if reports.iter().all(|r| r.passed) { 0 } else { 4 })
        }
        Command::MnistFetch { config, dir, mirror } => {
            let config_dir = match config {
                Some(p) => match ExperimentConfig::load(p)?.data {
                    DataConfig::Mnist { dir, .. } => dir,
                    DataConfig::Synthetic { .. } => None,
                },
                None => None,
            };
            let dir = resolve_data_dir(dir.or(config_dir).as_deref());
            let written = fetch_mnist(&dir, &mirror)?;
            println!("{}: {} files downloaded, all verified", dir.display(), written.len());
            Ok(0)
        }
        experiment => {
            let config = config_for(experiment)?;
            let summary = run_experiment(&config)?;
            print_summary(&summary);
            Ok(summary.failures.first().map_or(0, |f| f.exit_code))
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 success, 2 config, 3 I/O, 4 numerical.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let class = match e.exit_code() {
                2 => "config",
                3 => "io",
                _ => "numerical",
            };
            eprintln!("error[{class}]: {e}");
            e.exit_code()
        }
    }
}
