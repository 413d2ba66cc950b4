//! Combined death-then-replication schedule.
//!
//! Every `period` steps the least efficient neurons of one hidden layer
//! (those below `cutoff`, at most `max_fraction` of the layer) are removed,
//! and the same number of the most efficient survivors are replicated, so
//! the layer size is conserved.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::efficiency::{efficiency_for, relation_for, LinearRelation, Method};
use crate::error::{Error, Result};
use crate::netcore::{Network, ParamSet};
use crate::neuronstats::{collect_stats, StatsConfig};
use crate::rng::{stream, stream_rng, StreamRng};
use crate::surgery::{apply_death, replicate, resize_after_death, resize_after_replication, DeathPlan, SplitRule};
use crate::trainer::{record_step, EvalHook, EventKind, Hyperparams, RunRecord, SurgeryEvent, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifecycleConfig {
    /// Training steps between interventions.
    pub period: u64,
    /// Efficiency threshold below which neurons are removed; `"inf"` in JSON
    /// removes up to the cap at every intervention.
    #[serde(with = "cutoff_json")]
    pub cutoff: f64,
    /// Cap on removals per intervention, as a fraction of the layer size.
    pub max_fraction: f64,
    pub death_method: Method,
    pub split_alpha: f64,
    pub split_beta: f64,
    /// Hidden layer index; 0 is the input layer.
    pub layer: usize,
}

mod cutoff_json {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            period: 500,
            cutoff: 0.005,
            max_fraction: 0.5,
            death_method: Method::A1,
            split_alpha: 0.01,
            split_beta: 0.01,
            layer: 1,
        }
    }
}

impl LifecycleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidArgument("lifecycle period must be at least 1".into()));
        }
        if self.cutoff.is_nan() || self.cutoff < 0.0 {
            return Err(Error::InvalidArgument("cutoff must be non-negative".into()));
        }
        if !(self.max_fraction > 0.0 && self.max_fraction <= 0.5) {
            return Err(Error::InvalidArgument("max_fraction must be in (0, 1/2]".into()));
        }
        self.split_rule().validate()
    }

    pub fn split_rule(&self) -> SplitRule {
        SplitRule::beta(self.split_alpha, self.split_beta)
    }

    /// Whether an intervention can ever remove anything.
    pub fn is_active(&self) -> bool {
        self.cutoff > 0.0
    }

    /// Removal cap for a layer of `n` neurons.
    pub fn cap(&self, n: usize) -> usize {
        (n as f64 * self.max_fraction).floor() as usize
    }
}

/// Result of one intervention.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifecycleOutcome {
    /// Removed neurons, as indices before the intervention, in removal order.
    pub removed: Vec<usize>,
    /// Replicated parents, as indices before the intervention.
    pub replicated: Vec<usize>,
    /// Efficiencies of the layer before the intervention.
    pub efficiencies: Vec<f64>,
    pub events: Vec<SurgeryEvent>,
}

impl LifecycleOutcome {
    pub fn n_removed(&self) -> usize {
        self.removed.len()
    }

    pub fn n_added(&self) -> usize {
        self.replicated.len()
    }
}

/// One death-then-replication intervention on `config.layer`.
///
/// Statistics are collected on `data` with the current weights. The removal
/// set is fixed from that snapshot. A1 relations depend only on the removed
/// neuron's own mean, so they are all taken from the snapshot; A2 and A3
/// relations involve peers, so statistics are refreshed before each further
/// removal. Optimizer state, when given, is resized alongside the net.
pub fn lifecycle_step(
    net: &mut Network,
    data: &Dataset,
    config: &LifecycleConfig,
    stats_config: &StatsConfig,
    rng: &mut StreamRng,
    step: u64,
    mut velocity: Option<&mut ParamSet>,
) -> Result<LifecycleOutcome> {
    config.validate()?;
    let l = config.layer;
    if !net.is_hidden(l) {
        return Err(Error::InvalidArgument(format!("layer {l} is not a hidden layer")));
    }
    let n = net.layer_sizes()[l];
    if n < 2 {
        return Err(Error::InvalidArgument(format!("layer {l} has fewer than 2 neurons")));
    }
    let (stats, down) = collect_stats(net, data, l, stats_config)?;
    let report = efficiency_for(config.death_method, &stats, &down, net.weights(l))?;
    let removed: Vec<usize> = report
        .ascending()
        .into_iter()
        .filter(|&k| report.values[k] < config.cutoff)
        .take(config.cap(n))
        .collect();

    let mut outcome = LifecycleOutcome {
        efficiencies: report.values.clone(),
        ..Default::default()
    };
    if removed.is_empty() {
        return Ok(outcome);
    }

    // alive[current index] = index before the intervention
    let mut alive: Vec<usize> = (0..n).collect();
    for (nth, &orig) in removed.iter().enumerate() {
        let cur = alive.iter().position(|&a| a == orig).expect("neuron still alive");
        let relation = match (config.death_method, nth) {
            (method, 0) => relation_for(method, cur, &stats, &down, net.weights(l))?,
            (Method::A1, _) => {
                let mut coefficients = vec![0.0; alive.len()];
                coefficients[cur] = 1.0;
                LinearRelation {
                    layer: l,
                    target: cur,
                    coefficients,
                    constant: stats.mean[orig],
                    method: Method::A1,
                }
            }
            (method, _) => {
                let (s, d) = collect_stats(net, data, l, stats_config)?;
                relation_for(method, cur, &s, &d, net.weights(l))?
            }
        };
        let plan = DeathPlan {
            layer: l,
            neuron: cur,
            relation,
            exact: false,
        };
        apply_death(net, &plan)?;
        if let Some(v) = velocity.as_deref_mut() {
            resize_after_death(v, l, cur);
        }
        alive.remove(cur);
        outcome.events.push(SurgeryEvent {
            step,
            kind: EventKind::Death,
            layer: l,
            neuron: cur,
            detail: format!("{} E={}", config.death_method, report.values[orig]),
        });
    }
    outcome.removed = removed;

    let rule = config.split_rule();
    let parents: Vec<usize> = report
        .descending()
        .into_iter()
        .filter(|k| alive.contains(k))
        .take(outcome.removed.len())
        .collect();
    for &orig in &parents {
        let cur = alive.iter().position(|&a| a == orig).expect("survivor");
        let child = replicate(net, l, cur, rule, rng)?;
        if let Some(v) = velocity.as_deref_mut() {
            resize_after_replication(v, l);
        }
        outcome.events.push(SurgeryEvent {
            step,
            kind: EventKind::Replicate,
            layer: l,
            neuron: cur,
            detail: format!("{rule} child={child}"),
        });
    }
    outcome.replicated = parents;
    debug_assert_eq!(net.layer_sizes()[l], n);
    Ok(outcome)
}

/// Trains with an intervention after every `config.period` steps (none
/// after the final step). With `cutoff == 0` no intervention ever fires and
/// the trajectory equals plain training bit for bit.
pub fn run_with_lifecycle(
    net: &mut Network,
    data: &Dataset,
    hyper: &Hyperparams,
    config: &LifecycleConfig,
    stats_config: &StatsConfig,
    eval: Option<&EvalHook<'_>>,
) -> Result<RunRecord> {
    config.validate()?;
    let mut record = RunRecord::default();
    if hyper.steps == 0 {
        hyper.validate()?;
        return Ok(record);
    }
    let mut trainer = Trainer::new(net, data, *hyper)?;
    let mut intervention = 0u64;
    for s in 0..hyper.steps {
        let loss = trainer.step(net, data, s)?;
        let done = s + 1;
        record_step(&mut record, net, done, loss, eval, hyper.loss)?;
        if config.is_active() && done % config.period == 0 && done < hyper.steps {
            let mut rng = stream_rng(hyper.seed, stream::LIFECYCLE, intervention);
            let outcome = lifecycle_step(
                net,
                data,
                config,
                stats_config,
                &mut rng,
                done,
                Some(trainer.velocity_mut()),
            )?;
            record.events.extend(outcome.events);
            intervention += 1;
        }
    }
    Ok(record)
}
