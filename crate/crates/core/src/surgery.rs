//! Topology surgery on hidden layers: programmed death (remove a neuron
//! and fold its signal into the next layer through a linear relation) and
//! replication (append a child that copies a parent's inputs and shares its
//! outgoing weights).
//!
//! Children are appended at the end of the layer, so existing indices are
//! stable under replication; death compacts the indices above the removed
//! neuron.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::efficiency::LinearRelation;
use crate::error::{Error, Result};
use crate::netcore::{init_bound, uniform_symmetric, Network, ParamSet};
use crate::neuronstats::LayerStats;
use crate::rng::{stream, stream_rng};

/// A relation whose mean squared residual is below this is considered exact.
pub const EXACT_RESIDUAL: f64 = 1e-10;

fn check_hidden(net: &Network, layer: usize) -> Result<()> {
    if !net.is_hidden(layer) {
        return Err(Error::InvalidArgument(format!("layer {layer} is not a hidden layer")));
    }
    Ok(())
}

fn check_neuron(net: &Network, layer: usize, k: usize) -> Result<()> {
    check_hidden(net, layer)?;
    if k >= net.layer_sizes()[layer] {
        return Err(Error::InvalidArgument(format!(
            "neuron {k} not in layer {layer} of size {}",
            net.layer_sizes()[layer]
        )));
    }
    Ok(())
}

/// Removal of neuron `neuron` from hidden `layer`, rewired through `relation`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathPlan {
    pub layer: usize,
    pub neuron: usize,
    pub relation: LinearRelation,
    /// Whether the relation's mean squared residual is below [`EXACT_RESIDUAL`].
    pub exact: bool,
}

impl DeathPlan {
    pub fn new(relation: LinearRelation, stats: &LayerStats) -> Self {
        Self {
            layer: relation.layer,
            neuron: relation.target,
            exact: relation.mean_square_residual(stats) < EXACT_RESIDUAL,
            relation,
        }
    }
}

/// Removes the planned neuron.
///
/// Substituting `x_k = (a_0 - sum_{j != k} a_j x_j) / a_k` into every
/// downstream pre-activation gives `w'_ij = w_ij - w_ik a_j / a_k` and
/// `b'_i = b_i + w_ik a_0 / a_k`; the row and column of `k` are then deleted.
pub fn apply_death(net: &mut Network, plan: &DeathPlan) -> Result<()> {
    let (l, k) = (plan.layer, plan.neuron);
    check_neuron(net, l, k)?;
    if plan.relation.layer != l || plan.relation.target != k {
        return Err(Error::InvalidArgument(
            "relation does not target the planned neuron".into(),
        ));
    }
    let n = net.layer_sizes()[l];
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot remove the last neuron of layer {l}"
        )));
    }
    plan.relation.validate(n)?;
    let a = &plan.relation.coefficients;
    let ak = a[k];
    let ratios: Vec<f64> = a.iter().map(|aj| aj / ak).collect();
    let shift = plan.relation.constant / ak;

    let down = net.weights(l).clone();
    let out_k = down.col(k).to_vec();
    {
        let w = net.weights_mut(l);
        for (j, &r) in ratios.iter().enumerate() {
            if j == k || r == 0.0 {
                continue;
            }
            for (wij, &wik) in w.col_mut(j).iter_mut().zip(&out_k) {
                *wij -= wik * r;
            }
        }
        w.remove_col(k);
    }
    for (b, &wik) in net.bias_mut(l + 1).iter_mut().zip(&out_k) {
        *b += wik * shift;
    }
    net.weights_mut(l - 1).remove_row(k);
    net.bias_mut(l).remove(k);
    net.set_layer_size(l, n - 1);
    debug_assert!(net.validate().is_ok());
    Ok(())
}

/// How a parent's outgoing weights are shared with its child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SplitRule {
    /// Both get half of every outgoing weight.
    Equal,
    /// Each outgoing weight goes entirely to parent or child with probability 1/2.
    RandomBit,
    /// The parent keeps a `Beta(alpha, beta)` fraction of each outgoing weight.
    Beta { alpha: f64, beta: f64 },
    /// No split: a fresh neuron with initialization-distributed weights scaled by `scale`.
    RandomNeuron { scale: f64 },
}

impl SplitRule {
    pub fn beta(alpha: f64, beta: f64) -> Self {
        SplitRule::Beta { alpha, beta }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitRule::Beta { alpha, beta }
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!(
                    "Beta split needs positive finite parameters, got ({alpha}, {beta})"
                )))
            }
            SplitRule::RandomNeuron { scale } if !(scale >= 0.0 && scale.is_finite()) => Err(Error::InvalidArgument(
                format!("random neuron scale must be finite and >= 0, got {scale}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitRule::Equal => write!(f, "equal"),
            SplitRule::RandomBit => write!(f, "random_bit"),
            SplitRule::Beta { alpha, beta } => write!(f, "beta({alpha};{beta})"),
            SplitRule::RandomNeuron { scale } => write!(f, "random_neuron({scale})"),
        }
    }
}

/// Natural log of a `Gamma(shape, 1)` draw, finite even when the draw
/// itself would underflow. Small shapes use `G(a) = G(a + 1) * U^(1/a)`.
fn ln_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
        return g.sample(rng).ln();
    }
    let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape");
    let u: f64 = 1.0 - rng.random::<f64>();
    g.sample(rng).ln() + u.ln() / shape
}

/// One `Beta(alpha, beta)` draw as the ratio `X / (X + Y)` of two Gamma
/// draws, evaluated in log space so tiny shapes do not produce `0/0`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, alpha: f64, beta: f64) -> f64 {
    let lx = ln_gamma_draw(rng, alpha);
    let ly = ln_gamma_draw(rng, beta);
    let chi = 1.0 / (1.0 + (ly - lx).exp());
    chi.clamp(0.0, 1.0)
}

/// Appends a copy of neuron `p`'s incoming weights and bias; returns the child index.
fn push_child(net: &mut Network, layer: usize, p: usize) -> usize {
    let row = net.weights(layer - 1).row(p);
    net.weights_mut(layer - 1).push_row(&row);
    let b = net.bias(layer)[p];
    net.bias_mut(layer).push(b);
    let c = net.layer_sizes()[layer];
    net.set_layer_size(layer, c + 1);
    c
}

/// Child with identical inputs; parent and child each keep half of every
/// outgoing weight. Returns the child index.
pub fn replicate_equal(net: &mut Network, layer: usize, p: usize) -> Result<usize> {
    check_neuron(net, layer, p)?;
    let half: Vec<f64> = net.weights(layer).col(p).iter().map(|w| w * 0.5).collect();
    let c = push_child(net, layer, p);
    net.weights_mut(layer).col_mut(p).copy_from_slice(&half);
    net.weights_mut(layer).push_col(&half);
    Ok(c)
}

/// Parent's share `chi * w` and child's share `w - parent`, adjusted so the
/// two shares add back to `w` exactly in floating point.
pub fn split_weight(w: f64, chi: f64) -> (f64, f64) {
    let child = w - chi * w;
    let parent = w - child;
    (parent, child)
}

/// Child with identical inputs; each outgoing weight `w_ip` is split into
/// `chi_i * w_ip` for the parent and the exact remainder for the child.
pub fn replicate_split<R: Rng + ?Sized>(
    net: &mut Network,
    layer: usize,
    p: usize,
    rule: SplitRule,
    rng: &mut R,
) -> Result<usize> {
    check_neuron(net, layer, p)?;
    rule.validate()?;
    let old = net.weights(layer).col(p).to_vec();
    let mut parent = Vec::with_capacity(old.len());
    let mut child = Vec::with_capacity(old.len());
    for &w in &old {
        let chi = match rule {
            SplitRule::Equal => 0.5,
            SplitRule::RandomBit => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
            SplitRule::Beta { alpha, beta } => sample_beta(rng, alpha, beta),
            SplitRule::RandomNeuron { .. } => {
                return Err(Error::InvalidArgument("random neuron is not a split rule".into()))
            }
        };
        let (a, c) = split_weight(w, chi);
        parent.push(a);
        child.push(c);
    }
    let c = push_child(net, layer, p);
    net.weights_mut(layer).col_mut(p).copy_from_slice(&parent);
    net.weights_mut(layer).push_col(&child);
    Ok(c)
}

/// Appends a neuron with weights from the initialization distribution
/// (uniform within `scale / sqrt(fan_in)`) and zero bias.
pub fn add_random_neuron<R: Rng + ?Sized>(net: &mut Network, layer: usize, scale: f64, rng: &mut R) -> Result<usize> {
    check_hidden(net, layer)?;
    SplitRule::RandomNeuron { scale }.validate()?;
    let sizes = net.layer_sizes().to_vec();
    let in_bound = scale * init_bound(sizes[layer - 1]);
    let out_bound = scale * init_bound(sizes[layer]);
    let incoming: Vec<f64> = (0..sizes[layer - 1])
        .map(|_| uniform_symmetric(rng, in_bound))
        .collect();
    let outgoing: Vec<f64> = (0..sizes[layer + 1])
        .map(|_| uniform_symmetric(rng, out_bound))
        .collect();
    net.weights_mut(layer - 1).push_row(&incoming);
    net.bias_mut(layer).push(0.0);
    net.weights_mut(layer).push_col(&outgoing);
    let c = sizes[layer];
    net.set_layer_size(layer, c + 1);
    Ok(c)
}

/// Dispatches to the replication variant selected by `rule`.
pub fn replicate<R: Rng + ?Sized>(
    net: &mut Network,
    layer: usize,
    p: usize,
    rule: SplitRule,
    rng: &mut R,
) -> Result<usize> {
    match rule {
        SplitRule::Equal => replicate_equal(net, layer, p),
        SplitRule::RandomNeuron { scale } => add_random_neuron(net, layer, scale, rng),
        _ => replicate_split(net, layer, p, rule, rng),
    }
}

/// A self-contained replication request with its own seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub layer: usize,
    pub parent: usize,
    pub rule: SplitRule,
    pub seed: u64,
}

impl ReplicationPlan {
    pub fn apply(&self, net: &mut Network) -> Result<usize> {
        let mut rng = stream_rng(self.seed, stream::REPLICATE, self.parent as u64);
        replicate(net, self.layer, self.parent, self.rule, &mut rng)
    }
}

/// Drops the slots of a removed neuron from optimizer state.
pub fn resize_after_death(state: &mut ParamSet, layer: usize, k: usize) {
    state.remove_neuron(layer, k);
}

/// Adds zeroed slots for an appended neuron to optimizer state.
pub fn resize_after_replication(state: &mut ParamSet, layer: usize) {
    state.append_neuron(layer);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efficiency::{relation_a1, Method};
    use crate::rng::StreamRng;
    use rand::SeedableRng;

    fn net() -> Network {
        Network::init_uniform(&[3, 4, 3, 2], 11).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn equal_replication_preserves_output() {
        let mut n = net();
        let before = n.predict(&[0.2, -0.5, 0.9]).unwrap();
        let c = replicate_equal(&mut n, 1, 2).unwrap();
        assert_eq!(c, 4);
        assert_eq!(n.layer_sizes(), &[3, 5, 3, 2]);
        n.validate().unwrap();
        let t = n.forward(&[0.2, -0.5, 0.9]).unwrap();
        assert_eq!(t.activations(1)[2].to_bits(), t.activations(1)[4].to_bits());
        assert!(max_diff(&before, t.output()) < 1e-12);
    }

    #[test]
    fn split_sum_is_exact() {
        for &w in &[0.3, -1.7, 1e-300, 123.456, -0.1] {
            for &chi in &[0.0, 1.0, 0.5, 0.3, 1e-9, 0.999_999_7] {
                let (a, c) = split_weight(w, chi);
                assert_eq!(a + c, w, "w={w} chi={chi}");
            }
        }
    }

    #[test]
    fn non_hidden_layers_rejected() {
        let mut n = net();
        assert!(replicate_equal(&mut n, 0, 0).is_err());
        assert!(replicate_equal(&mut n, 3, 0).is_err());
        assert!(replicate_equal(&mut n, 1, 4).is_err());
        let mut rng = StreamRng::seed_from_u64(0);
        assert!(replicate_split(&mut n, 1, 0, SplitRule::beta(0.0, 1.0), &mut rng).is_err());
    }

    #[test]
    fn zero_scale_random_neuron_preserves_output() {
        let mut n = net();
        let x = [0.1, 0.2, 0.3];
        let before = n.predict(&x).unwrap();
        let mut rng = StreamRng::seed_from_u64(5);
        add_random_neuron(&mut n, 2, 0.0, &mut rng).unwrap();
        assert_eq!(n.predict(&x).unwrap(), before);
        assert_eq!(n.layer_sizes(), &[3, 4, 4, 2]);
    }

    #[test]
    fn replication_plan_is_deterministic() {
        let plan = ReplicationPlan {
            layer: 1,
            parent: 0,
            rule: SplitRule::beta(1.0, 1.0),
            seed: 9,
        };
        let (mut a, mut b) = (net(), net());
        plan.apply(&mut a).unwrap();
        plan.apply(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn death_of_disconnected_neuron_is_exact() {
        let mut n = net();
        n.weights_mut(1).col_mut(1).iter_mut().for_each(|w| *w = 0.0);
        let x = [0.4, -0.3, 0.8];
        let before = n.predict(&x).unwrap();
        let stats = LayerStats::from_activations(1, &[0.1, 0.2, 0.3, 0.4, 0.0, 0.1, 0.5, 0.3], 4).unwrap();
        let plan = DeathPlan::new(relation_a1(1, &stats).unwrap(), &stats);
        assert!(!plan.exact);
        apply_death(&mut n, &plan).unwrap();
        assert_eq!(n.layer_sizes(), &[3, 3, 3, 2]);
        assert_eq!(n.predict(&x).unwrap(), before);
    }

    #[test]
    fn death_adds_mean_signal_to_bias() {
        let mut n = net();
        let stats =
            LayerStats::from_covariance(1, vec![0.0, 0.3, 0.0, 0.0], crate::matrix::Matrix::identity(4), 10).unwrap();
        let rel = relation_a1(1, &stats).unwrap();
        assert_eq!(rel.method, Method::A1);
        let old_bias = n.bias(2).to_vec();
        let w = n.weights(1).col(1).to_vec();
        apply_death(&mut n, &DeathPlan::new(rel, &stats)).unwrap();
        for i in 0..3 {
            assert!((n.bias(2)[i] - (old_bias[i] + 0.3 * w[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn last_neuron_cannot_die() {
        let mut n = Network::init_uniform(&[2, 1, 2], 1).unwrap();
        let stats = LayerStats::from_activations(1, &[0.1, 0.3], 1).unwrap();
        let plan = DeathPlan::new(relation_a1(0, &stats).unwrap(), &stats);
        assert!(apply_death(&mut n, &plan).is_err());
    }

    #[test]
    fn optimizer_state_follows_surgery() {
        let mut n = net();
        let mut v = ParamSet::zeros_like(&n);
        replicate_equal(&mut n, 1, 0).unwrap();
        resize_after_replication(&mut v, 1);
        assert!(v.matches(&n));
        let stats = LayerStats::from_covariance(1, vec![0.0; 5], crate::matrix::Matrix::identity(5), 10).unwrap();
        apply_death(&mut n, &DeathPlan::new(relation_a1(3, &stats).unwrap(), &stats)).unwrap();
        resize_after_death(&mut v, 1, 3);
        assert!(v.matches(&n));
    }

    #[test]
    fn beta_moments() {
        let mut rng = StreamRng::seed_from_u64(1);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_beta(&mut rng, 2.0, 5.0)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / draws.len() as f64;
        // Beta(2,5): mean 2/7, variance 10/392
        assert!((mean - 2.0 / 7.0).abs() < 0.01, "{mean}");
        assert!((var - 10.0 / 392.0).abs() < 0.002, "{var}");
        assert!(draws.iter().all(|d| (0.0..=1.0).contains(d)));
    }
}
