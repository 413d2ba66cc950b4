//! Self-contained correctness checks run by `neurolife oracle`.
//!
//! Each check builds its own random networks and data from fixed seeds, so
//! the outcome is reproducible and needs no dataset on disk.

use std::fmt;
use std::time::{Duration, Instant};

use neurolife::oracle::delta_loss_on_removal;
use neurolife::{
    apply_death, collect_stats, conditional_variance, efficiency_connection_cut, jacobi_eigen, relation_a3, replicate,
    replicate_equal, sample_loss, Dataset, DeathPlan, LossKind, Matrix, Method, Network, SplitRule, StatsConfig,
    Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..=1.0)).collect()
}

/// Network with every weight and bias uniform in [-1, 1].
fn random_net(sizes: &[usize], r: &mut impl Rng) -> Network {
    let mut net = Network::zeros(sizes).expect("valid sizes");
    for g in 0..sizes.len() - 1 {
        for v in net.weights_mut(g).as_mut_slice() {
            *v = r.random_range(-1.0..=1.0);
        }
        for b in net.bias_mut(g + 1).iter_mut() {
            *b = r.random_range(-1.0..=1.0);
        }
    }
    net
}

fn random_sizes(r: &mut impl Rng) -> [usize; 4] {
    [
        r.random_range(1..=10),
        r.random_range(1..=8),
        r.random_range(1..=6),
        r.random_range(2..=4),
    ]
}

fn random_dataset(dim: usize, n: usize, classes: usize, r: &mut impl Rng) -> Dataset {
    let inputs = random_vec(r, dim * n);
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    Dataset::new(
        "random",
        dim,
        classes,
        inputs,
        labels,
        neurolife::dataio::Normalization::None,
    )
    .expect("consistent dataset")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckReport {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckReport {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn loss_at(net: &Network, x: &[f64], loss: LossKind, target: Target<'_>) -> f64 {
    sample_loss(&net.forward(x).expect("input fits"), loss, target).expect("target fits")
}

/// Largest `|analytic - numeric| / max(|analytic| + |numeric|, floor)` over
/// all parameters, with central differences of step `1e-5`.
pub fn gradient_relative_error(net: &Network, x: &[f64], loss: LossKind, target: Target<'_>, floor: f64) -> f64 {
    const H: f64 = 1e-5;
    let grads = net
        .backward(&net.forward(x).expect("input fits"), loss, target)
        .expect("target fits");
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * H);
        worst = worst.max((analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor));
    };
    for g in 0..net.num_layers() - 1 {
        for idx in 0..net.weights(g).as_slice().len() {
            let orig = net.weights(g).as_slice()[idx];
            probe.weights_mut(g).as_mut_slice()[idx] = orig + H;
            let plus = loss_at(&probe, x, loss, target);
            probe.weights_mut(g).as_mut_slice()[idx] = orig - H;
            let minus = loss_at(&probe, x, loss, target);
            probe.weights_mut(g).as_mut_slice()[idx] = orig;
            compare(grads.weights[g].as_slice()[idx], plus, minus);
        }
        for i in 0..net.bias(g + 1).len() {
            let orig = net.bias(g + 1)[i];
            probe.bias_mut(g + 1)[i] = orig + H;
            let plus = loss_at(&probe, x, loss, target);
            probe.bias_mut(g + 1)[i] = orig - H;
            let minus = loss_at(&probe, x, loss, target);
            probe.bias_mut(g + 1)[i] = orig;
            compare(grads.biases[g][i], plus, minus);
        }
    }
    worst
}

/// Central differences with step `1e-5` resolve a gradient only to about
/// `|H| * eps / h ~ 1e-11` absolute, so relative errors are taken against at
/// least this magnitude; `1e-5` of it is that resolution.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Analytic gradients of 100 random nets (weights and biases uniform in
/// [-1, 1], many tanh units saturated) against central differences, for both
/// losses; relative error below 1e-5. The error with a `1e-8` floor is
/// reported alongside.
pub fn check_gradients() -> CheckReport {
    timed("gradient correctness", || {
        let mut r = rng(2024);
        let (mut worst, mut strict) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let sizes = random_sizes(&mut r);
            let net = random_net(&sizes, &mut r);
            let x = random_vec(&mut r, sizes[0]);
            let t = random_vec(&mut r, sizes[3]);
            let label = r.random_range(0..sizes[3]);
            for (loss, target) in [
                (LossKind::BoundaryMse, Target::Values(&t)),
                (LossKind::CrossEntropy, Target::Class(label)),
            ] {
                worst = worst.max(gradient_relative_error(&net, &x, loss, target, GRADIENT_FLOOR));
                strict = strict.max(gradient_relative_error(&net, &x, loss, target, 1e-8));
            }
        }
        (
            worst < 1e-5,
            format!("100 nets, worst relative error {worst:.3e} (limit 1e-5); {strict:.3e} with a 1e-8 floor"),
        )
    })
}

/// Every split rule on 100 random nets: output unchanged within 1e-9 on 100
/// inputs each, and parent plus child outgoing weights equal the old weights
/// bitwise.
pub fn check_replication() -> CheckReport {
    timed("replication preservation", || {
        let rules = [
            SplitRule::Equal,
            SplitRule::RandomBit,
            SplitRule::beta(0.01, 0.01),
            SplitRule::beta(1.0, 1.0),
            SplitRule::beta(100.0, 100.0),
        ];
        let mut r = rng(77);
        let mut worst = 0.0f64;
        let mut sum_mismatches = 0usize;
        for rule in rules {
            for _ in 0..100 {
                let sizes = random_sizes(&mut r);
                let original = random_net(&sizes, &mut r);
                let layer = r.random_range(1..=2);
                let p = r.random_range(0..sizes[layer]);
                let mut net = original.clone();
                let c = replicate(&mut net, layer, p, rule, &mut r).expect("hidden parent");
                let (old, new) = (original.weights(layer), net.weights(layer));
                sum_mismatches += (0..old.rows())
                    .filter(|&i| new.get(i, p) + new.get(i, c) != old.get(i, p))
                    .count();
                for _ in 0..100 {
                    let x = random_vec(&mut r, sizes[0]);
                    let d = max_abs_diff(&original.predict(&x).unwrap(), &net.predict(&x).unwrap());
                    worst = worst.max(d);
                }
            }
        }
        (
            worst < 1e-9 && sum_mismatches == 0,
            format!("5 rules x 100 nets x 100 inputs, max output change {worst:.3e} (limit 1e-9), {sum_mismatches} split-sum mismatches"),
        )
    })
}

/// Equal split followed by covariance-relation death of the child restores
/// the original function within 1e-9 on 1000 inputs, with a measured loss
/// change below 1e-9.
pub fn check_death_exactness() -> CheckReport {
    timed("death exactness", || {
        let mut r = rng(5);
        let mut worst_out = 0.0f64;
        let mut worst_delta = 0.0f64;
        for _ in 0..20 {
            let sizes = [6, r.random_range(2..=8), r.random_range(2..=6), 3];
            let original = random_net(&sizes, &mut r);
            let data = random_dataset(6, 400, 3, &mut r);
            let layer = r.random_range(1..=2);
            let p = r.random_range(0..sizes[layer]);
            let mut net = original.clone();
            let c = replicate_equal(&mut net, layer, p).expect("hidden parent");
            let (stats, _) = collect_stats(&net, &data, layer, &StatsConfig::default()).expect("stats");
            let relation = match relation_a3(c, &stats) {
                Ok(rel) => rel,
                Err(e) => return (false, format!("no relation for the duplicate: {e}")),
            };
            let delta = delta_loss_on_removal(&net, &data, LossKind::CrossEntropy, &relation).expect("removal");
            worst_delta = worst_delta.max(delta.abs());
            apply_death(&mut net, &DeathPlan::new(relation, &stats)).expect("death");
            for _ in 0..1000 {
                let x = random_vec(&mut r, 6);
                worst_out = worst_out.max(max_abs_diff(&original.predict(&x).unwrap(), &net.predict(&x).unwrap()));
            }
        }
        (
            worst_out < 1e-9 && worst_delta < 1e-9,
            format!("20 nets x 1000 inputs, max output change {worst_out:.3e}, max |loss change| {worst_delta:.3e} (limits 1e-9)"),
        )
    })
}

/// The connection-cut efficiency equals the neuron's variance over its
/// conditional variance, to 1e-10 relative, on 50 random instances.
pub fn check_efficiency_identity() -> CheckReport {
    timed("efficiency identity", || {
        let mut r = rng(11);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let sizes = [5, r.random_range(2..=8), r.random_range(1..=6), 3];
            let net = random_net(&sizes, &mut r);
            let data = random_dataset(5, 300, 3, &mut r);
            let (stats, down) = collect_stats(&net, &data, 1, &StatsConfig::default()).expect("stats");
            let w = net.weights(1);
            let report = efficiency_connection_cut(&stats, &down, w, Method::A2).expect("efficiency");
            for k in 0..stats.size() {
                let alt = stats.variance(k) / conditional_variance(&down, w, k).expect("influence");
                let scale = alt.abs().max(report.values[k].abs());
                if scale > 0.0 {
                    worst = worst.max((report.values[k] - alt).abs() / scale);
                }
            }
        }
        (
            worst < 1e-10,
            format!("50 instances, worst relative difference {worst:.3e} (limit 1e-10)"),
        )
    })
}

fn random_symmetric(n: usize, r: &mut impl Rng) -> Matrix {
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = r.random_range(-1.0..1.0);
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    c
}

/// Jacobi decomposition of random symmetric matrices up to 100x100:
/// reconstruction error (max row sum) below 1e-9, orthonormality below 1e-8.
pub fn check_jacobi() -> CheckReport {
    timed("jacobi eigensolver", || {
        let mut r = rng(3);
        let (mut recon, mut ortho) = (0.0f64, 0.0f64);
        for n in [1, 2, 3, 5, 10, 20, 35, 50, 75, 100] {
            for _ in 0..2 {
                let c = random_symmetric(n, &mut r);
                let e = match jacobi_eigen(&c) {
                    Ok(e) => e,
                    Err(err) => return (false, format!("{n}x{n}: {err}")),
                };
                let rec = e.reconstruct();
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| (rec.get(i, j) - c.get(i, j)).abs()).sum();
                    recon = recon.max(row);
                    for j in 0..n {
                        let d: f64 = e.vector(i).iter().zip(e.vector(j)).map(|(a, b)| a * b).sum();
                        ortho = ortho.max((d - if i == j { 1.0 } else { 0.0 }).abs());
                    }
                }
            }
        }
        (
            recon < 1e-9 && ortho < 1e-8,
            format!("sizes 1..100, reconstruction {recon:.3e} (limit 1e-9), orthonormality {ortho:.3e} (limit 1e-8)"),
        )
    })
}

/// All fast checks, in a fixed order.
pub fn run_all() -> Vec<CheckReport> {
    vec![
        check_gradients(),
        check_replication(),
        check_death_exactness(),
        check_efficiency_identity(),
        check_jacobi(),
    ]
}
