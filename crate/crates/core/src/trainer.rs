//! Minibatch SGD with momentum and L2 weight decay, plus run histories.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::{BatchOrder, BatchPlan, Batcher, Dataset};
use crate::error::{shape_err, Error, Result};
use crate::netcore::{ForwardTrace, LossKind, Network, ParamSet, Target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub batch_size: usize,
    /// Number of minibatch updates.
    pub steps: u64,
    pub seed: u64,
    pub loss: LossKind,
}

impl Hyperparams {
    /// Batch 600, momentum 0, L2 0.001, learning rate 0.001, cross-entropy.
    pub fn standard(steps: u64, seed: u64) -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.0,
            l2: 0.001,
            batch_size: 600,
            steps,
            seed,
            loss: LossKind::CrossEntropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    /// A single update also accepts a zero learning rate (frozen weights).
    fn check(&self, allow_frozen: bool) -> Result<()> {
        let lr = self.learning_rate;
        if !((lr > 0.0 || (allow_frozen && lr == 0.0)) && lr.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must be in [0, 1)".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidArgument("l2 must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }

    pub fn batch_plan(&self) -> BatchPlan {
        BatchPlan {
            batch_size: self.batch_size,
            rng_seed: self.seed,
            order: BatchOrder::ShuffledPerEpoch,
        }
    }
}

/// Applies one update from summed gradients over `n` samples.
///
/// `g = sum/n + l2*w` (weights only), `v <- m*v - lr*g`, `p <- p + v`.
fn apply_update(net: &mut Network, sum: &ParamSet, n: usize, hyper: &Hyperparams, velocity: &mut ParamSet) {
    let n = n as f64;
    let (lr, m, l2) = (hyper.learning_rate, hyper.momentum, hyper.l2);
    for ((w, gw), vw) in net
        .all_weights_mut()
        .iter_mut()
        .zip(&sum.weights)
        .zip(&mut velocity.weights)
    {
        for ((p, &g), v) in w.as_mut_slice().iter_mut().zip(gw.as_slice()).zip(vw.as_mut_slice()) {
            let grad = g / n + l2 * *p;
            *v = m * *v - lr * grad;
            *p += *v;
        }
    }
    for ((b, gb), vb) in net
        .all_biases_mut()
        .iter_mut()
        .zip(&sum.biases)
        .zip(&mut velocity.biases)
    {
        for ((p, &g), v) in b.iter_mut().zip(gb).zip(vb.iter_mut()) {
            *v = m * *v - lr * (g / n);
            *p += *v;
        }
    }
}

/// One SGD update on `batch`. Returns the mean batch loss before the update,
/// excluding the L2 penalty.
pub fn sgd_step(
    net: &mut Network,
    batch: &[(&[f64], Target<'_>)],
    hyper: &Hyperparams,
    velocity: &mut ParamSet,
) -> Result<f64> {
    hyper.check(true)?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !velocity.matches(net) {
        return shape_err("velocity does not match network layout");
    }
    let mut sum = ParamSet::zeros_like(net);
    let mut trace = ForwardTrace::for_network(net);
    let mut loss = 0.0;
    for &(x, t) in batch {
        if x.len() != net.input_dim() {
            return shape_err("input length mismatch");
        }
        net.forward_into(x, &mut trace);
        loss += net.accumulate_gradients(&trace, hyper.loss, t, &mut sum)?;
    }
    apply_update(net, &sum, batch.len(), hyper, velocity);
    Ok(loss / batch.len() as f64)
}

/// Step-wise SGD driver holding the velocity and reusable buffers.
///
/// The batch of step `s` depends only on `(seed, s)`, so interleaving other
/// work between steps never changes which samples a step sees.
#[derive(Debug, Clone)]
pub struct Trainer {
    hyper: Hyperparams,
    batcher: Batcher,
    velocity: ParamSet,
    grads: ParamSet,
    trace: ForwardTrace,
}

impl Trainer {
    pub fn new(net: &Network, data: &Dataset, hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        let plan = hyper.batch_plan();
        plan.validate(data.len())?;
        if data.dim() != net.input_dim() {
            return shape_err("dataset dimension does not match network input");
        }
        Ok(Self {
            hyper,
            batcher: Batcher::new(data.len(), plan),
            velocity: ParamSet::zeros_like(net),
            grads: ParamSet::zeros_like(net),
            trace: ForwardTrace::for_network(net),
        })
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn velocity(&self) -> &ParamSet {
        &self.velocity
    }

    /// Velocity buffers, for keeping them aligned with topology changes.
    pub fn velocity_mut(&mut self) -> &mut ParamSet {
        &mut self.velocity
    }

    /// Runs update number `step` (zero-based) and returns its batch loss.
    pub fn step(&mut self, net: &mut Network, data: &Dataset, step: u64) -> Result<f64> {
        if !self.velocity.matches(net) {
            return shape_err("velocity does not match network layout; resize it after surgery");
        }
        if !self.grads.matches(net) {
            self.grads = ParamSet::zeros_like(net);
        }
        self.grads.fill_zero();
        let mut loss = 0.0;
        let batch = self.batcher.batch(step);
        for &i in batch {
            let (x, y) = data.sample(i);
            net.forward_into(x, &mut self.trace);
            loss += net.accumulate_gradients(&self.trace, self.hyper.loss, Target::Class(y), &mut self.grads)?;
        }
        let n = batch.len();
        apply_update(net, &self.grads, n, &self.hyper, &mut self.velocity);
        Ok(loss / n as f64)
    }
}

/// Loss and accuracy of `net` on a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

pub fn evaluate(net: &Network, data: &Dataset, loss: LossKind) -> Result<Evaluation> {
    if data.dim() != net.input_dim() {
        return shape_err("dataset dimension does not match network input");
    }
    let mut trace = ForwardTrace::for_network(net);
    let mut total = 0.0;
    let mut correct = 0usize;
    for (x, y) in data.iter() {
        net.forward_into(x, &mut trace);
        total += crate::netcore::sample_loss(&trace, loss, Target::Class(y))?;
        if argmax(trace.output()) == y {
            correct += 1;
        }
    }
    Ok(Evaluation {
        loss: total / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Evaluation schedule: every `every` steps on `data`.
#[derive(Debug, Clone, Copy)]
pub struct EvalHook<'a> {
    pub every: u64,
    pub data: &'a Dataset,
}

impl EvalHook<'_> {
    pub fn due(&self, step: u64) -> bool {
        self.every > 0 && step.is_multiple_of(self.every)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Number of updates applied so far (1-based).
    pub step: u64,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
    pub eval_acc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Death,
    Replicate,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Death => "death",
            EventKind::Replicate => "replicate",
        }
    }
}

/// One topology change. `neuron` is the index at the time of the event.
#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryEvent {
    pub step: u64,
    pub kind: EventKind,
    pub layer: usize,
    pub neuron: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
    pub events: Vec<SurgeryEvent>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunRecord {
    pub fn push_step(&mut self, rec: StepRecord) -> Result<()> {
        if let Some(last) = self.steps.last() {
            if rec.step <= last.step {
                return Err(Error::InvalidArgument(format!(
                    "step {} recorded after step {}",
                    rec.step, last.step
                )));
            }
        }
        self.steps.push(rec);
        Ok(())
    }

    /// `step,train_loss,eval_loss,eval_acc`, missing evaluations left empty.
    pub fn steps_csv(&self) -> String {
        let mut s = String::from("step,train_loss,eval_loss,eval_acc\n");
        for r in &self.steps {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.step,
                r.train_loss,
                opt(r.eval_loss),
                opt(r.eval_acc)
            );
        }
        s
    }

    /// `step,event,layer,neuron,detail`
    pub fn events_csv(&self) -> String {
        let mut s = String::from("step,event,layer,neuron,detail\n");
        for e in &self.events {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                e.step,
                e.kind.as_str(),
                e.layer,
                e.neuron,
                e.detail
            );
        }
        s
    }

    /// Evaluated `(step, eval_loss)` pairs.
    pub fn eval_series(&self) -> Vec<(u64, f64)> {
        self.steps
            .iter()
            .filter_map(|r| r.eval_loss.map(|l| (r.step, l)))
            .collect()
    }
}

pub(crate) fn record_step(
    record: &mut RunRecord,
    net: &Network,
    step: u64,
    train_loss: f64,
    eval: Option<&EvalHook<'_>>,
    loss: LossKind,
) -> Result<()> {
    let (eval_loss, eval_acc) = match eval {
        Some(h) if h.due(step) => {
            let e = evaluate(net, h.data, loss)?;
            (Some(e.loss), Some(e.accuracy))
        }
        _ => (None, None),
    };
    record.push_step(StepRecord {
        step,
        train_loss,
        eval_loss,
        eval_acc,
    })
}

/// Trains for `hyper.steps` updates, evaluating on the hook's schedule.
pub fn train(net: &mut Network, data: &Dataset, hyper: &Hyperparams, eval: Option<&EvalHook<'_>>) -> Result<RunRecord> {
    let mut record = RunRecord::default();
    if hyper.steps == 0 {
        hyper.validate()?;
        return Ok(record);
    }
    let mut trainer = Trainer::new(net, data, *hyper)?;
    for s in 0..hyper.steps {
        let loss = trainer.step(net, data, s)?;
        record_step(&mut record, net, s + 1, loss, eval, hyper.loss)?;
    }
    Ok(record)
}

/// Trailing moving average with the given window (shorter at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
