//! Layered feedforward networks: representation, forward pass, losses and
//! reverse-mode gradients.
//!
//! Layers are numbered `0..L`. Layer 0 is the input, layer `L-1` the
//! output; both are linear. Every layer in between is a `tanh` layer.
//! The weight matrix of gap `l` maps layer `l` to layer `l+1` and has shape
//! `layer_sizes[l+1] x layer_sizes[l]`, so entry `(i, j)` is the connection
//! from neuron `j` of layer `l` to neuron `i` of layer `l+1`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::{axpy, dot, Matrix};
use crate::rng::{stream, stream_rng};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Linear => y,
            Activation::Tanh => y.tanh(),
        }
    }

    /// Derivative at pre-activation `y`.
    #[inline]
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => {
                let t = y.tanh();
                1.0 - t * t
            }
        }
    }

    /// Derivative expressed through the activation value `x = f(y)`.
    #[inline]
    fn derivative_from_output(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - x * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Half squared error on the output layer.
    BoundaryMse,
    /// Softmax over the linear outputs followed by negative log-likelihood.
    CrossEntropy,
}

/// What a sample's output is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Values(&'a [f64]),
    /// A class index; one-hot encoded for [`LossKind::BoundaryMse`].
    Class(usize),
}

/// A layered feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    version: u32,
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Network {
    /// All-zero network with the standard activation layout.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let weights = layer_sizes.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activations: standard_activations(layer_sizes.len()),
            weights,
            biases,
        })
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init_uniform(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut rng = stream_rng(seed, stream::INIT, 0);
        for w in &mut net.weights {
            let bound = init_bound(w.cols());
            for v in w.as_mut_slice() {
                *v = uniform_symmetric(&mut rng, bound);
            }
        }
        Ok(net)
    }

    /// Assembles a network from parts, validating every shape invariant.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        activations: Vec<Activation>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let net = Self {
            layer_sizes,
            activations,
            weights,
            biases,
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        check_sizes(sizes)?;
        if self.activations != standard_activations(sizes.len()) {
            return Err(Error::Format(
                "boundary layers must be linear and hidden layers tanh".into(),
            ));
        }
        if self.weights.len() != sizes.len() - 1 || self.biases.len() != sizes.len() - 1 {
            return shape_err("expected one weight matrix and bias vector per gap");
        }
        for (g, w) in self.weights.iter().enumerate() {
            if w.shape() != (sizes[g + 1], sizes[g]) {
                return shape_err(format!(
                    "gap {g}: weight shape {:?}, expected {:?}",
                    w.shape(),
                    (sizes[g + 1], sizes[g])
                ));
            }
            if self.biases[g].len() != sizes[g + 1] {
                return shape_err(format!(
                    "layer {}: bias length {}, expected {}",
                    g + 1,
                    self.biases[g].len(),
                    sizes[g + 1]
                ));
            }
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn activation(&self, layer: usize) -> Activation {
        self.activations[layer]
    }

    pub fn is_hidden(&self, layer: usize) -> bool {
        layer > 0 && layer + 1 < self.layer_sizes.len()
    }

    /// Weight matrix of the gap from `layer` to `layer + 1`.
    pub fn weights(&self, gap: usize) -> &Matrix {
        &self.weights[gap]
    }

    pub fn weights_mut(&mut self, gap: usize) -> &mut Matrix {
        &mut self.weights[gap]
    }

    /// Bias vector of `layer` (must be `>= 1`).
    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer - 1]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<f64> {
        &mut self.biases[layer - 1]
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub(crate) fn all_weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub(crate) fn all_biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub(crate) fn set_layer_size(&mut self, layer: usize, n: usize) {
        self.layer_sizes[layer] = n;
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.input_dim() {
            return shape_err(format!("input length {}, expected {}", input.len(), self.input_dim()));
        }
        let mut trace = ForwardTrace::for_network(self);
        self.forward_into(input, &mut trace);
        Ok(trace)
    }

    /// Forward pass into a reusable trace. Panics on shape mismatch.
    ///
    /// Zero inputs are skipped in the first gap; the sums are unchanged
    /// because adding an exact zero never alters a partial sum.
    pub fn forward_into(&self, input: &[f64], trace: &mut ForwardTrace) {
        assert_eq!(input.len(), self.input_dim(), "input length mismatch");
        trace.reshape(&self.layer_sizes);
        trace.x[0].copy_from_slice(input);
        trace.y[0].copy_from_slice(input);
        trace.fprime[0].iter_mut().for_each(|d| *d = 1.0);
        trace.active.clear();
        trace
            .active
            .extend(input.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j));

        for g in 0..self.weights.len() {
            let w = &self.weights[g];
            let (prev, rest) = trace.x.split_at_mut(g + 1);
            let src = &prev[g];
            let y = &mut trace.y[g + 1];
            y.copy_from_slice(&self.biases[g]);
            if g == 0 {
                for &j in &trace.active {
                    axpy(src[j], w.col(j), y);
                }
            } else {
                for (j, &xj) in src.iter().enumerate() {
                    axpy(xj, w.col(j), y);
                }
            }
            let act = self.activations[g + 1];
            let x = &mut rest[0];
            for ((xi, di), &yi) in x.iter_mut().zip(trace.fprime[g + 1].iter_mut()).zip(y.iter()) {
                *xi = act.apply(yi);
                *di = act.derivative_from_output(*xi);
            }
        }
    }

    /// Output-layer values for one input.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output().to_vec())
    }

    /// Gradients of the per-sample loss with respect to every weight and bias.
    pub fn backward(&self, trace: &ForwardTrace, loss: LossKind, target: Target<'_>) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradients(trace, loss, target, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sample's gradients into `grads` and returns its loss.
    pub fn accumulate_gradients(
        &self,
        trace: &ForwardTrace,
        loss: LossKind,
        target: Target<'_>,
        grads: &mut Gradients,
    ) -> Result<f64> {
        if trace.layer_sizes() != self.layer_sizes.as_slice() {
            return shape_err("trace does not match network layout");
        }
        if grads.weights.len() != self.weights.len()
            || grads
                .weights
                .iter()
                .zip(&self.weights)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return shape_err("gradient buffers do not match network layout");
        }
        let (value, mut delta) = output_loss_and_delta(trace.output(), loss, target)?;

        for g in (0..self.weights.len()).rev() {
            let src = &trace.x[g];
            let gw = &mut grads.weights[g];
            if g == 0 {
                for &j in &trace.active {
                    axpy(src[j], &delta, gw.col_mut(j));
                }
            } else {
                for (j, &xj) in src.iter().enumerate() {
                    axpy(xj, &delta, gw.col_mut(j));
                }
            }
            for (b, d) in grads.biases[g].iter_mut().zip(&delta) {
                *b += d;
            }
            if g > 0 {
                let w = &self.weights[g];
                let fp = &trace.fprime[g];
                delta = (0..w.cols()).map(|j| dot(w.col(j), &delta) * fp[j]).collect();
            }
        }
        Ok(value)
    }

    /// Mean loss over `(input, target)` pairs.
    pub fn mean_loss<'a, 'b, I>(&self, loss: LossKind, samples: I) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a [f64], Target<'b>)>,
    {
        let mut trace = ForwardTrace::for_network(self);
        let mut total = 0.0;
        let mut n = 0usize;
        for (input, target) in samples {
            if input.len() != self.input_dim() {
                return shape_err("input length mismatch");
            }
            self.forward_into(input, &mut trace);
            total += sample_loss(&trace, loss, target)?;
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidArgument("mean loss over zero samples".into()));
        }
        Ok(total / n as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            version: FORMAT_VERSION,
            layer_sizes: self.layer_sizes.clone(),
            activations: self.activations.clone(),
            weights: self.weights.clone(),
            biases: self.biases.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported network format version {}",
                file.version
            )));
        }
        Self::from_parts(file.layer_sizes, file.activations, file.weights, file.biases)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return shape_err("a network needs at least an input and an output layer");
    }
    if sizes.contains(&0) {
        return shape_err("layer sizes must be positive");
    }
    Ok(())
}

fn standard_activations(n_layers: usize) -> Vec<Activation> {
    (0..n_layers)
        .map(|l| {
            if l == 0 || l + 1 == n_layers {
                Activation::Linear
            } else {
                Activation::Tanh
            }
        })
        .collect()
}

pub(crate) fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

#[inline]
pub(crate) fn uniform_symmetric<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * bound
}

/// Per-layer pre-activations `y`, activations `x` and derivatives `f'(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    y: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    fprime: Vec<Vec<f64>>,
    active: Vec<usize>,
}

impl ForwardTrace {
    pub fn for_network(net: &Network) -> Self {
        let mk = || net.layer_sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        Self {
            y: mk(),
            x: mk(),
            fprime: mk(),
            active: Vec::with_capacity(net.input_dim()),
        }
    }

    fn reshape(&mut self, sizes: &[usize]) {
        if self.layer_sizes() == sizes {
            return;
        }
        for buf in [&mut self.y, &mut self.x, &mut self.fprime] {
            *buf = sizes.iter().map(|&n| vec![0.0; n]).collect();
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.x.iter().map(Vec::len).collect()
    }

    pub fn num_layers(&self) -> usize {
        self.x.len()
    }

    pub fn input(&self) -> &[f64] {
        &self.x[0]
    }

    pub fn output(&self) -> &[f64] {
        self.x.last().expect("non-empty trace")
    }

    pub fn activations(&self, layer: usize) -> &[f64] {
        &self.x[layer]
    }

    pub fn pre_activations(&self, layer: usize) -> &[f64] {
        &self.y[layer]
    }

    pub fn derivatives(&self, layer: usize) -> &[f64] {
        &self.fprime[layer]
    }
}

/// `1/2 * sum (x_out - target)^2`.
pub fn loss_boundary_mse(trace: &ForwardTrace, target: &[f64]) -> Result<f64> {
    let out = trace.output();
    if out.len() != target.len() {
        return shape_err(format!("target length {}, expected {}", target.len(), out.len()));
    }
    Ok(0.5 * out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>())
}

/// `-log softmax(logits)[label]`, evaluated with the max logit subtracted.
pub fn loss_cross_entropy(trace: &ForwardTrace, label: usize) -> Result<f64> {
    let logits = trace.output();
    check_class(logits.len(), label)?;
    let (max, sum) = softmax_parts(logits);
    Ok(sum.ln() - (logits[label] - max))
}

/// Loss of one traced sample.
pub fn sample_loss(trace: &ForwardTrace, loss: LossKind, target: Target<'_>) -> Result<f64> {
    match (loss, target) {
        (LossKind::BoundaryMse, Target::Values(t)) => loss_boundary_mse(trace, t),
        (LossKind::BoundaryMse, Target::Class(c)) => {
            check_class(trace.output().len(), c)?;
            let t = one_hot(trace.output().len(), c);
            loss_boundary_mse(trace, &t)
        }
        (LossKind::CrossEntropy, Target::Class(c)) => loss_cross_entropy(trace, c),
        (LossKind::CrossEntropy, Target::Values(_)) => Err(Error::InvalidArgument(
            "cross-entropy needs a class label target".into(),
        )),
    }
}

fn check_class(n_out: usize, label: usize) -> Result<()> {
    if n_out < 2 {
        return Err(Error::InvalidArgument(
            "classification needs an output dimension of at least 2".into(),
        ));
    }
    if label >= n_out {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {n_out} outputs"
        )));
    }
    Ok(())
}

pub(crate) fn one_hot(n: usize, c: usize) -> Vec<f64> {
    let mut t = vec![0.0; n];
    t[c] = 1.0;
    t
}

fn softmax_parts(logits: &[f64]) -> (f64, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>();
    (max, sum)
}

/// Loss value and its gradient with respect to the (linear) output layer.
fn output_loss_and_delta(out: &[f64], loss: LossKind, target: Target<'_>) -> Result<(f64, Vec<f64>)> {
    match (loss, target) {
        (LossKind::BoundaryMse, t) => {
            let owned;
            let t = match t {
                Target::Values(v) => v,
                Target::Class(c) => {
                    check_class(out.len(), c)?;
                    owned = one_hot(out.len(), c);
                    &owned
                }
            };
            if t.len() != out.len() {
                return shape_err("target length mismatch");
            }
            let delta: Vec<f64> = out.iter().zip(t).map(|(o, t)| o - t).collect();
            let value = 0.5 * delta.iter().map(|d| d * d).sum::<f64>();
            Ok((value, delta))
        }
        (LossKind::CrossEntropy, Target::Class(c)) => {
            check_class(out.len(), c)?;
            let (max, sum) = softmax_parts(out);
            let mut delta: Vec<f64> = out.iter().map(|z| (z - max).exp() / sum).collect();
            delta[c] -= 1.0;
            Ok((sum.ln() - (out[c] - max), delta))
        }
        (LossKind::CrossEntropy, Target::Values(_)) => Err(Error::InvalidArgument(
            "cross-entropy needs a class label target".into(),
        )),
    }
}

/// Per-parameter buffers shaped like a network's weights and biases.
///
/// Used for gradients and for momentum velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

pub type Gradients = ParamSet;

impl ParamSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Mirrors the removal of neuron `k` from hidden `layer`.
    pub fn remove_neuron(&mut self, layer: usize, k: usize) {
        self.weights[layer - 1].remove_row(k);
        self.biases[layer - 1].remove(k);
        self.weights[layer].remove_col(k);
    }

    /// Mirrors appending a neuron to hidden `layer`, with zeroed slots.
    pub fn append_neuron(&mut self, layer: usize) {
        let fan_in = self.weights[layer - 1].cols();
        self.weights[layer - 1].push_row(&vec![0.0; fan_in]);
        self.biases[layer - 1].push(0.0);
        let fan_out = self.weights[layer].rows();
        self.weights[layer].push_col(&vec![0.0; fan_out]);
    }

    pub fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.weights.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(a, b)| a.shape() == b.shape())
            && self.biases.iter().zip(&net.biases).all(|(a, b)| a.len() == b.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        let mut net = Network::zeros(&[1, 1, 1]).unwrap();
        net.weights_mut(0).set(0, 0, 1.0);
        net.weights_mut(1).set(0, 0, 1.0);
        net
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(&[3, 4, 2]).unwrap();
        let t = net.forward(&[0.3, -2.0, 5.0]).unwrap();
        assert!(t.activations(1).iter().all(|&v| v == 0.0));
        assert!(t.output().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_chain_evaluates_tanh() {
        let t = tiny().forward(&[2.0]).unwrap();
        // tanh(2) = (e^4 - 1) / (e^4 + 1)
        let expected = 0.964_027_580_075_816_9;
        assert!((t.activations(1)[0] - expected).abs() < 1e-15);
        assert!((t.output()[0] - expected).abs() < 1e-15);
        assert!((t.derivatives(1)[0] - (1.0 - expected * expected)).abs() < 1e-15);
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::init_uniform(&[6, 5, 4, 3], 11).unwrap();
        let x = [0.1, 0.0, -0.4, 0.9, 0.0, 0.2];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn wrong_input_length_is_a_shape_error() {
        let net = Network::zeros(&[3, 2, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn mse_values() {
        let mut net = Network::zeros(&[1, 2]).unwrap();
        net.bias_mut(1)[0] = 1.0;
        let t = net.forward(&[0.0]).unwrap();
        assert_eq!(loss_boundary_mse(&t, &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(loss_boundary_mse(&t, &[1.0, 0.0]).unwrap(), 0.0);
        assert!(loss_boundary_mse(&t, &[1.0]).is_err());
    }

    #[test]
    fn cross_entropy_uniform_and_saturated() {
        let net = Network::zeros(&[2, 10]).unwrap();
        let t = net.forward(&[0.0, 0.0]).unwrap();
        let ce = loss_cross_entropy(&t, 3).unwrap();
        assert!((ce - 10f64.ln()).abs() < 1e-12);

        let mut net = Network::zeros(&[1, 3]).unwrap();
        net.bias_mut(1)[0] = 30.0;
        let t = net.forward(&[0.0]).unwrap();
        assert!(loss_cross_entropy(&t, 0).unwrap() < 1e-9);
        assert!(loss_cross_entropy(&t, 0).unwrap() >= 0.0);
        assert!(loss_cross_entropy(&t, 3).is_err());
    }

    #[test]
    fn cross_entropy_needs_two_outputs() {
        let net = Network::zeros(&[1, 1]).unwrap();
        let t = net.forward(&[0.0]).unwrap();
        assert!(loss_cross_entropy(&t, 0).is_err());
    }

    #[test]
    fn mse_gradient_vanishes_at_target() {
        let net = Network::init_uniform(&[3, 4, 2], 5).unwrap();
        let t = net.forward(&[0.5, -0.5, 0.25]).unwrap();
        let target = t.output().to_vec();
        let g = net
            .backward(&t, LossKind::BoundaryMse, Target::Values(&target))
            .unwrap();
        assert!(g.weights.iter().all(|w| w.as_slice().iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn output_bias_gradient_is_residual() {
        let net = Network::init_uniform(&[3, 4, 2], 9).unwrap();
        let t = net.forward(&[0.5, -0.5, 0.25]).unwrap();
        let target = [0.3, -0.7];
        let g = net
            .backward(&t, LossKind::BoundaryMse, Target::Values(&target))
            .unwrap();
        for i in 0..2 {
            assert_eq!(g.biases[1][i], t.output()[i] - target[i]);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let net = Network::init_uniform(&[7, 5, 3, 2], 3).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn json_rejects_bad_layout() {
        let net = Network::init_uniform(&[3, 2, 2], 3).unwrap();
        let text = net.to_json().unwrap().replace("\"tanh\"", "\"linear\"");
        assert!(Network::from_json(&text).is_err());
        let text = net.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(Network::from_json(&text).is_err());
    }
}
