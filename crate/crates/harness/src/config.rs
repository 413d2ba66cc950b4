//! Experiment configuration: a JSON document with defaults for every key.
//!
//! ```json
//! {
//!   "kind": "combined",
//!   "architecture": "N4",
//!   "seeds": [1, 2, 3],
//!   "hyper": { "learning_rate": 0.001, "steps": 5000 },
//!   "data": { "source": "mnist", "train_subset": 10000, "eval_subset": 1000 },
//!   "lifecycle": { "cutoff": 0.005, "period": 500 },
//!   "output_dir": "out/combined"
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use neurolife::{LifecycleConfig, LossKind, Method, SplitRule, StatsConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Environment variable naming the MNIST cache directory.
pub const DATA_DIR_ENV: &str = "NEUROLIFE_DATA_DIR";

/// Named architectures with two hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    N1,
    N2,
    N3,
    N4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::N1, Preset::N2, Preset::N3, Preset::N4];

    pub fn layer_sizes(self) -> Vec<usize> {
        match self {
            Preset::N1 => vec![784, 5, 20, 10],
            Preset::N2 => vec![784, 10, 10, 10],
            Preset::N3 => vec![784, 20, 5, 10],
            Preset::N4 => vec![784, 100, 5, 10],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A preset name or an explicit list of layer sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Architecture {
    Preset(Preset),
    Sizes(Vec<usize>),
}

impl Architecture {
    pub fn layer_sizes(&self) -> Vec<usize> {
        match self {
            Architecture::Preset(p) => p.layer_sizes(),
            Architecture::Sizes(s) => s.clone(),
        }
    }
}

impl FromStr for Architecture {
    type Err = HarnessError;

    /// `N1`..`N4` or dash-separated sizes such as `784-5-20-10`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(p) = Preset::ALL.iter().find(|p| p.to_string().eq_ignore_ascii_case(t)) {
            return Ok(Architecture::Preset(*p));
        }
        t.split('-')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Architecture::Sizes)
            .map_err(|_| HarnessError::Config(format!("unknown architecture {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Train,
    Scan,
    PruneOnce,
    Replicate,
    Combined,
    Pdf,
}

/// Training hyperparameters; the run seed comes from the seed list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let p = neurolife::Hyperparams::standard(5000, 0);
        Self {
            learning_rate: p.learning_rate,
            momentum: p.momentum,
            l2: p.l2,
            batch_size: p.batch_size,
            steps: p.steps,
            loss: p.loss,
        }
    }
}

impl TrainConfig {
    pub fn hyperparams(&self, seed: u64) -> neurolife::Hyperparams {
        neurolife::Hyperparams {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            l2: self.l2,
            batch_size: self.batch_size,
            steps: self.steps,
            seed,
            loss: self.loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// MNIST from `dir`, else `$NEUROLIFE_DATA_DIR`, else `data/mnist`.
    /// Training uses the first `train_subset` training images, evaluation
    /// the first `eval_subset` test images.
    Mnist {
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default = "default_train_subset")]
        train_subset: usize,
        #[serde(default = "default_eval_subset")]
        eval_subset: usize,
    },
    /// Generated data whose second coordinate duplicates the first; the
    /// evaluation samples follow the training samples in the same stream.
    Synthetic {
        dim: usize,
        samples: usize,
        #[serde(default = "default_synthetic_eval")]
        eval_samples: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_train_subset() -> usize {
    10_000
}

fn default_eval_subset() -> usize {
    1000
}

fn default_synthetic_eval() -> usize {
    200
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Mnist {
            dir: None,
            train_subset: default_train_subset(),
            eval_subset: default_eval_subset(),
        }
    }
}

/// Resolves the MNIST directory: explicit path, then the environment, then
/// `data/mnist` under the working directory.
pub fn resolve_data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(d) = explicit {
        return d.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from("data/mnist"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub layer: usize,
    pub methods: Vec<Method>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            layer: 1,
            methods: vec![Method::A1, Method::A3],
        }
    }
}

/// Surgery after training: `count` removals (prune) or replications (grow),
/// followed by `post_steps` more training steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurgeryConfig {
    pub layer: usize,
    pub method: Method,
    pub count: usize,
    pub rule: SplitRule,
    pub post_steps: u64,
}

impl Default for SurgeryConfig {
    fn default() -> Self {
        Self {
            layer: 1,
            method: Method::A1,
            count: 1,
            rule: SplitRule::beta(0.01, 0.01),
            post_steps: 0,
        }
    }
}

/// Replication study: one neuron added by each rule, then training continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdfConfig {
    pub layer: usize,
    pub method: Method,
    pub horizons: Vec<u64>,
}

impl Default for PdfConfig {
    fn default() -> Self {
        Self {
            layer: 1,
            method: Method::A1,
            horizons: vec![10, 100, 1000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub architecture: Architecture,
    pub seeds: Vec<u64>,
    pub hyper: TrainConfig,
    pub data: DataConfig,
    /// Training samples used for statistics and for measuring loss changes.
    pub stats_subset: usize,
    pub stats_chunks: usize,
    /// Evaluate every this many steps (0 disables evaluation).
    pub eval_every: u64,
    /// Trailing number of evaluations averaged into the final loss.
    pub smooth_evals: usize,
    pub scan: ScanConfig,
    pub surgery: SurgeryConfig,
    pub lifecycle: LifecycleConfig,
    pub pdf: PdfConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Train,
            architecture: Architecture::Preset(Preset::N1),
            seeds: vec![1],
            hyper: TrainConfig::default(),
            data: DataConfig::default(),
            stats_subset: 10_000,
            stats_chunks: 1,
            eval_every: 10,
            smooth_evals: 10,
            scan: ScanConfig::default(),
            surgery: SurgeryConfig::default(),
            lifecycle: LifecycleConfig::default(),
            pdf: PdfConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document, or the `config` section of a manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid JSON: {e}")))?;
        let value = match value.get("config") {
            Some(inner) if value.get("files").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.architecture.layer_sizes()
    }

    pub fn stats_config(&self) -> StatsConfig {
        StatsConfig {
            max_samples: self.stats_subset,
            chunks: self.stats_chunks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let sizes = self.layer_sizes();
        if sizes.len() < 3 || sizes.contains(&0) {
            return bad(format!(
                "architecture needs at least one hidden layer and no empty layer, got {sizes:?}"
            ));
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        let mut unique = self.seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != self.seeds.len() {
            return bad("seed list has duplicates".into());
        }
        self.hyper
            .hyperparams(0)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.stats_subset == 0 || self.stats_chunks == 0 {
            return bad("stats_subset and stats_chunks must be positive".into());
        }
        match &self.data {
            DataConfig::Mnist {
                train_subset,
                eval_subset,
                ..
            } => {
                if *train_subset == 0 || *eval_subset == 0 {
                    return bad("MNIST subsets must be positive".into());
                }
                if sizes[0] != 784 || *sizes.last().unwrap() != 10 {
                    return bad(format!("MNIST needs 784 inputs and 10 outputs, got {sizes:?}"));
                }
            }
            DataConfig::Synthetic {
                dim,
                samples,
                eval_samples,
                ..
            } => {
                if *dim < 2 || *samples < *dim || *eval_samples == 0 {
                    return bad("synthetic data needs dim >= 2, samples >= dim and eval_samples > 0".into());
                }
                if sizes[0] != *dim || *sizes.last().unwrap() != 2 {
                    return bad(format!(
                        "synthetic data needs {dim} inputs and 2 outputs, got {sizes:?}"
                    ));
                }
            }
        }
        let hidden = |layer: usize, what: &str| {
            if layer == 0 || layer + 1 >= sizes.len() {
                Err(HarnessError::Config(format!(
                    "{what} layer {layer} is not a hidden layer"
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::Scan => {
                hidden(self.scan.layer, "scan")?;
                if self.scan.methods.is_empty() {
                    return bad("scan needs at least one method".into());
                }
            }
            ExperimentKind::PruneOnce | ExperimentKind::Replicate => {
                hidden(self.surgery.layer, "surgery")?;
                self.surgery
                    .rule
                    .validate()
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                if self.kind == ExperimentKind::PruneOnce && self.surgery.count >= sizes[self.surgery.layer] {
                    return bad("prune count must leave at least one neuron".into());
                }
            }
            ExperimentKind::Combined => {
                hidden(self.lifecycle.layer, "lifecycle")?;
                self.lifecycle
                    .validate()
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            ExperimentKind::Pdf => {
                hidden(self.pdf.layer, "pdf")?;
                if self.pdf.horizons.is_empty() || self.pdf.horizons.contains(&0) {
                    return bad("pdf horizons must be positive".into());
                }
            }
            ExperimentKind::Train => {}
        }
        Ok(())
    }
}

/// Parses `equal`, `random_bit`, `beta:A,B` or `random_neuron:S`.
pub fn parse_split_rule(s: &str) -> Result<SplitRule> {
    let t = s.trim().to_ascii_lowercase();
    let (name, args) = t.split_once(':').unwrap_or((&t, ""));
    let nums = || -> Result<Vec<f64>> {
        args.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| HarnessError::Config(format!("bad split rule arguments in {s:?}")))
    };
    let rule = match (name, args.is_empty()) {
        ("equal", true) => SplitRule::Equal,
        ("random_bit", true) => SplitRule::RandomBit,
        ("beta", false) => match nums()?.as_slice() {
            [a, b] => SplitRule::beta(*a, *b),
            [a] => SplitRule::beta(*a, *a),
            _ => return Err(HarnessError::Config(format!("beta takes one or two parameters: {s:?}"))),
        },
        ("random_neuron", _) => SplitRule::RandomNeuron {
            scale: if args.is_empty() { 1.0 } else { nums()?[0] },
        },
        _ => return Err(HarnessError::Config(format!("unknown split rule {s:?}"))),
    };
    rule.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(rule)
}
