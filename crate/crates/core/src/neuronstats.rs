//! Activation statistics of one hidden layer with frozen weights.
//!
//! Means and covariances are ensemble averages over a dataset subset,
//! computed two-pass per chunk and combined by a pairwise tree merge of
//! `(count, mean, co-moment)` triples. The merge order is fixed, so results
//! only depend on the chunk count through rounding.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{axpy, Matrix};
use crate::netcore::{ForwardTrace, Network};

/// Eigenvalues in `[-NEGATIVE_EIGEN_TOL, 0)` are rounding noise and clamp to zero.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Spectral decomposition `C = V diag(values) V^T`, values ascending,
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl Eigen {
    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.col(i)
    }

    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors.get(i, k) * self.values[k] * self.vectors.get(j, k))
                .sum()
        })
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps rotate every `(p, q)` pair of the upper triangle in row-major
/// order until the off-diagonal Frobenius norm drops to `1e-12 * ||C||_F`.
/// Each eigenvector is signed so that its largest component is positive.
pub fn jacobi_eigen(c: &Matrix) -> Result<Eigen> {
    let n = c.rows();
    if c.cols() != n {
        return Err(Error::Shape(format!(
            "eigenproblem needs a square matrix, got {:?}",
            c.shape()
        )));
    }
    let scale = c.max_abs().max(1.0);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (c.get(i, j), c.get(j, i));
            let diff = (x - y).abs();
            if diff > SYMMETRY_TOL * scale || !x.is_finite() {
                return Err(Error::Asymmetric { row: i, col: j, diff });
            }
            a[i * n + j] = 0.5 * (x + y);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let tol = JACOBI_REL_TOL * c.frobenius_norm();
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= tol {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = cs * arp - sn * arq;
                    let new_rq = sn * arp + cs * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = cs * vrp - sn * vrq;
                    v[r * n + q] = sn * vrp + cs * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.col_mut(dst);
        for r in 0..n {
            col[r] = v[r * n + src];
        }
        normalize_sign(col);
    }
    Ok(Eigen {
        values,
        vectors,
        sweeps,
    })
}

/// Flips `v` so its largest-magnitude component (first one on near-ties) is positive.
fn normalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(&lead) = v.iter().find(|x| x.abs() >= max - 1e-12) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Count, mean and co-moment matrix `sum (x - mean)(x - mean)^T` of a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: Vec<f64>,
    pub comoment: Matrix,
}

impl Moments {
    /// Exact two-pass moments of row-major samples of width `dim`.
    pub fn two_pass(rows: &[f64], dim: usize) -> Self {
        let count = rows.len().checked_div(dim).unwrap_or(0);
        let mut mean = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        if count > 0 {
            mean.iter_mut().for_each(|m| *m /= count as f64);
            // Refine with the mean deviation, which makes constant columns exact.
            let mut corr = vec![0.0; dim];
            for row in rows.chunks_exact(dim) {
                for ((c, &x), &m) in corr.iter_mut().zip(row).zip(&mean) {
                    *c += x - m;
                }
            }
            for (m, c) in mean.iter_mut().zip(corr) {
                *m += c / count as f64;
            }
        }
        let mut comoment = Matrix::zeros(dim, dim);
        let mut dev = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for ((d, &x), &m) in dev.iter_mut().zip(row).zip(&mean) {
                *d = x - m;
            }
            for j in 0..dim {
                axpy(dev[j], &dev, comoment.col_mut(j));
            }
        }
        Self { count, mean, comoment }
    }

    /// Combines moments of two disjoint sample sets.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return other.clone();
        }
        if other.count == 0 {
            return self.clone();
        }
        let n = self.count + other.count;
        let (na, nb, nf) = (self.count as f64, other.count as f64, n as f64);
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, d)| a + d * nb / nf).collect();
        let w = na * nb / nf;
        let dim = self.mean.len();
        let comoment = Matrix::from_fn(dim, dim, |i, j| {
            self.comoment.get(i, j) + other.comoment.get(i, j) + delta[i] * delta[j] * w
        });
        Moments {
            count: n,
            mean,
            comoment,
        }
    }

    /// Two-pass moments per chunk, merged pairwise in a fixed tree order.
    pub fn chunked(rows: &[f64], dim: usize, chunks: usize) -> Self {
        let count = rows.len() / dim.max(1);
        let chunks = chunks.clamp(1, count.max(1));
        let per = count.div_ceil(chunks);
        let mut level: Vec<Moments> = rows
            .chunks(per.max(1) * dim)
            .map(|c| Moments::two_pass(c, dim))
            .collect();
        if level.is_empty() {
            return Moments::two_pass(rows, dim);
        }
        while level.len() > 1 {
            level = level
                .chunks(2)
                .map(|pair| match pair {
                    [a, b] => a.merge(b),
                    [a] => a.clone(),
                    _ => unreachable!(),
                })
                .collect();
        }
        level.pop().expect("one merged moment")
    }

    /// Population covariance `comoment / count`.
    pub fn covariance(&self) -> Matrix {
        let n = self.count.max(1) as f64;
        let dim = self.mean.len();
        Matrix::from_fn(dim, dim, |i, j| self.comoment.get(i, j) / n)
    }
}

/// Mean, covariance and spectrum of one layer's activations.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub layer: usize,
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    /// Ascending, non-negative after clamping.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `eigenvalues`.
    pub eigenvectors: Matrix,
    pub n_samples: usize,
    /// Number of eigenvalues that were slightly negative and clamped to zero.
    pub clamped: usize,
}

impl LayerStats {
    /// Builds stats from a mean and covariance, decomposing the covariance.
    pub fn from_covariance(layer: usize, mean: Vec<f64>, covariance: Matrix, n_samples: usize) -> Result<Self> {
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(Error::Shape("covariance does not match mean length".into()));
        }
        let eig = jacobi_eigen(&covariance)?;
        let mut clamped = 0;
        let mut eigenvalues = eig.values;
        for v in &mut eigenvalues {
            if *v < 0.0 {
                if *v < -NEGATIVE_EIGEN_TOL {
                    return Err(Error::NegativeEigenvalue { value: *v });
                }
                *v = 0.0;
                clamped += 1;
            }
        }
        Ok(Self {
            layer,
            mean,
            covariance,
            eigenvalues,
            eigenvectors: eig.vectors,
            n_samples,
            clamped,
        })
    }

    /// Stats of explicit activation rows (row-major, `dim` values each).
    pub fn from_activations(layer: usize, rows: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || rows.is_empty() || !rows.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(
                "need a non-empty set of equal-length rows".into(),
            ));
        }
        let m = Moments::two_pass(rows, dim);
        Self::from_covariance(layer, m.mean.clone(), m.covariance(), m.count)
    }

    pub fn size(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, k: usize) -> f64 {
        self.covariance.get(k, k)
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        self.eigenvectors.col(i)
    }

    /// `layer,neuron,mean,var`
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("layer,neuron,mean,var\n");
        for k in 0..self.size() {
            let _ = writeln!(s, "{},{},{},{}", self.layer, k, self.mean[k], self.variance(k));
        }
        s
    }

    /// Dense row-major covariance, one whitespace-separated row per line.
    pub fn covariance_text(&self) -> String {
        let mut s = String::new();
        for row in self.covariance.to_rows() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Per-neuron quantities of the layer fed by the analysed layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DownstreamStats {
    pub layer: usize,
    /// `y_i = sum_k w_ik <x_k> + b_i`
    pub mean_input: Vec<f64>,
    /// `f'_i(y_i)` at the mean input.
    pub fprime: Vec<f64>,
    pub mean: Vec<f64>,
    /// `C_ii`
    pub variance: Vec<f64>,
}

impl DownstreamStats {
    pub fn size(&self) -> usize {
        self.fprime.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsConfig {
    /// Use at most this many leading samples of the dataset.
    pub max_samples: usize,
    /// Number of chunks merged by the moment tree (1 = plain two-pass).
    pub chunks: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            max_samples: 10_000,
            chunks: 1,
        }
    }
}

/// Row-major activations of `layer` over every sample of `data`.
pub fn layer_activations(net: &Network, data: &Dataset, layer: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len() * net.layer_sizes()[layer]);
    let mut trace = ForwardTrace::for_network(net);
    for (x, _) in data.iter() {
        net.forward_into(x, &mut trace);
        out.extend_from_slice(trace.activations(layer));
    }
    out
}

/// Activation rows of layers `layer` and `layer + 1` over the subset.
fn paired_activations(net: &Network, data: &Dataset, layer: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let sizes = net.layer_sizes();
    let (d0, d1) = (sizes[layer], sizes[layer + 1]);
    let mut here = Vec::with_capacity(n * d0);
    let mut next = Vec::with_capacity(n * d1);
    let mut trace = ForwardTrace::for_network(net);
    for i in 0..n {
        net.forward_into(data.input(i), &mut trace);
        here.extend_from_slice(trace.activations(layer));
        next.extend_from_slice(trace.activations(layer + 1));
    }
    (here, next)
}

/// Statistics of hidden `layer` and of the layer it feeds, with frozen weights.
pub fn collect_stats(
    net: &Network,
    data: &Dataset,
    layer: usize,
    config: &StatsConfig,
) -> Result<(LayerStats, DownstreamStats)> {
    if !net.is_hidden(layer) {
        return Err(Error::InvalidArgument(format!("layer {layer} is not a hidden layer")));
    }
    if data.dim() != net.input_dim() {
        return Err(Error::Shape("dataset dimension does not match network input".into()));
    }
    let n = data.len().min(config.max_samples);
    if n == 0 {
        return Err(Error::InvalidArgument("statistics need at least one sample".into()));
    }
    let sizes = net.layer_sizes();
    let (here, next) = paired_activations(net, data, layer, n);
    let m = Moments::chunked(&here, sizes[layer], config.chunks);
    let stats = LayerStats::from_covariance(layer, m.mean.clone(), m.covariance(), n)?;

    let down = Moments::chunked(&next, sizes[layer + 1], config.chunks);
    let w = net.weights(layer);
    let mut mean_input = net.bias(layer + 1).to_vec();
    for (k, &mk) in stats.mean.iter().enumerate() {
        axpy(mk, w.col(k), &mut mean_input);
    }
    let act = net.activation(layer + 1);
    let fprime = mean_input.iter().map(|&y| act.derivative(y)).collect();
    let variance = (0..sizes[layer + 1])
        .map(|i| down.comoment.get(i, i) / n as f64)
        .collect();
    Ok((
        stats,
        DownstreamStats {
            layer: layer + 1,
            mean_input,
            fprime,
            mean: down.mean,
            variance,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diagonal_matrix() {
        let c = Matrix::from_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        let e = jacobi_eigen(&c).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(e.vector(1), &[0.0, 0.0, 1.0]);
        assert_eq!(e.vector(2), &[1.0, 0.0, 0.0]);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let c = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = jacobi_eigen(&c).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(e.values[0], 1.0, 1e-14) && close(e.values[1], 3.0, 1e-14));
        assert!(close(e.vector(0)[0], h, 1e-14) && close(e.vector(0)[1], -h, 1e-14));
        assert!(close(e.vector(1)[0], h, 1e-14) && close(e.vector(1)[1], h, 1e-14));
    }

    #[test]
    fn asymmetric_input_rejected() {
        let c = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 2.0]]).unwrap();
        assert!(matches!(jacobi_eigen(&c), Err(Error::Asymmetric { .. })));
        assert!(jacobi_eigen(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_and_empty_matrices() {
        let e = jacobi_eigen(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
        let e = jacobi_eigen(&Matrix::zeros(0, 0)).unwrap();
        assert!(e.values.is_empty());
    }

    #[test]
    fn hand_covariance_of_two_points() {
        let s = LayerStats::from_activations(1, &[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(s.covariance.to_rows(), vec![vec![0.25, -0.25], vec![-0.25, 0.25]]);
        assert!(close(s.eigenvalues[0], 0.0, 1e-15));
        assert!(close(s.eigenvalues[1], 0.5, 1e-15));
        assert_eq!(s.mean, vec![0.5, 0.5]);
    }

    #[test]
    fn constant_activations_have_zero_covariance() {
        let rows: Vec<f64> = std::iter::repeat_n([0.3, -0.2, 0.9], 10).flatten().collect();
        let s = LayerStats::from_activations(1, &rows, 3).unwrap();
        assert!(s.covariance.as_slice().iter().all(|&v| v == 0.0));
        assert!(s.eigenvalues.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_eigenvalue_beyond_tolerance_is_an_error() {
        let c = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1e-6]]).unwrap();
        assert!(matches!(
            LayerStats::from_covariance(1, vec![0.0, 0.0], c, 2),
            Err(Error::NegativeEigenvalue { .. })
        ));
        let c = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1e-13]]).unwrap();
        let s = LayerStats::from_covariance(1, vec![0.0, 0.0], c, 2).unwrap();
        assert_eq!(s.clamped, 1);
        assert_eq!(s.eigenvalues[0], 0.0);
    }

    #[test]
    fn merge_matches_two_pass() {
        let rows: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 * 0.37).sin()).collect();
        let whole = Moments::two_pass(&rows, 3);
        for chunks in [2, 3, 5, 20] {
            let merged = Moments::chunked(&rows, 3, chunks);
            assert_eq!(merged.count, whole.count);
            for (a, b) in merged.mean.iter().zip(&whole.mean) {
                assert!(close(*a, *b, 1e-14));
            }
            for (a, b) in merged.comoment.as_slice().iter().zip(whole.comoment.as_slice()) {
                assert!(close(*a, *b, 1e-12));
            }
        }
    }

    #[test]
    fn csv_exports() {
        let s = LayerStats::from_activations(2, &[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(s.summary_csv(), "layer,neuron,mean,var\n2,0,0.5,0.25\n2,1,0.5,0.25\n");
        assert_eq!(s.covariance_text(), "0.25 -0.25\n-0.25 0.25\n");
    }

    #[test]
    fn collect_stats_rejects_boundary_layers() {
        let net = Network::init_uniform(&[3, 4, 2], 1).unwrap();
        let data = crate::dataio::synthetic_duplicate_dataset(3, 10, 1).unwrap();
        let cfg = StatsConfig::default();
        assert!(collect_stats(&net, &data, 0, &cfg).is_err());
        assert!(collect_stats(&net, &data, 2, &cfg).is_err());
        assert!(collect_stats(&net, &data, 1, &cfg).is_ok());
    }
}
