#![allow(dead_code)]

use std::path::PathBuf;

use neurolife::{Dataset, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Network with every weight and bias uniform in [-1, 1].
pub fn random_net(sizes: &[usize], seed: u64) -> Network {
    let mut net = Network::zeros(sizes).unwrap();
    let mut r = rng(seed);
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

pub fn random_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..=1.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest output discrepancy between two nets over `n` random inputs.
pub fn output_discrepancy(a: &Network, b: &Network, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let x = random_vec(&mut r, a.input_dim());
            max_abs_diff(&a.predict(&x).unwrap(), &b.predict(&x).unwrap())
        })
        .fold(0.0, f64::max)
}

/// Dataset of random inputs in [-1, 1] with random labels.
pub fn random_dataset(dim: usize, n: usize, classes: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let inputs = random_vec(&mut r, dim * n);
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    Dataset::new(
        "random",
        dim,
        classes,
        inputs,
        labels,
        neurolife::dataio::Normalization::None,
    )
    .unwrap()
}

/// MNIST directory from `MNIST_DIR` or the workspace `data/mnist`.
pub fn mnist_dir() -> PathBuf {
    if let Ok(d) = std::env::var("MNIST_DIR") {
        return PathBuf::from(d);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}
