//! Neuron efficiency measures and the linear relations used to rewire a
//! network when a neuron is removed.
//!
//! Two measures exist. The connection-cut efficiency
//! `E_k = C_kk * sum_i f'_i(y_i)^2 w_ik^2 / C_ii` estimates how much signal
//! neuron `k` injects into the next layer. The spectral efficiency
//! `E'_k = min_i lambda_i / (v^(i)_k)^2` measures how poorly `x_k` is
//! predicted linearly by its layer peers.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::neuronstats::{DownstreamStats, LayerStats};

/// Downstream neurons whose variance is below this carry no signal and are skipped.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Minimum squared eigenvector component (and minimum `|a_k|`) used as a divisor.
pub const COMPONENT_FLOOR: f64 = 1e-8;

/// Death algorithm: connection cut, conditional Gaussian or spectral relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    A1,
    A2,
    A3,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::A1, Method::A2, Method::A3];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::A1 => "A1",
            Method::A2 => "A2",
            Method::A3 => "A3",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Method::A1),
            "A2" => Ok(Method::A2),
            "A3" => Ok(Method::A3),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method {s:?} (expected A1, A2 or A3)"
            ))),
        }
    }
}

/// Per-neuron efficiencies of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub layer: usize,
    pub method: Method,
    /// `E_k` for A1/A2, `E'_k` for A3 (`+inf` when no eigencomponent is usable).
    pub values: Vec<f64>,
    /// For A3, the eigen index attaining the minimum.
    pub aux_index: Vec<Option<usize>>,
}

impl EfficiencyReport {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Finite-efficiency neurons from least to most efficient, ties by lowest index.
    pub fn ascending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).filter(|&k| self.values[k].is_finite()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        idx
    }

    /// Neurons from most to least efficient, ties by lowest index.
    pub fn descending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx
    }

    pub fn least_efficient(&self) -> Option<usize> {
        self.ascending().first().copied()
    }

    /// `layer,neuron,method,efficiency,aux_index`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,neuron,method,efficiency,aux_index\n");
        for (k, v) in self.values.iter().enumerate() {
            let aux = self.aux_index[k].map(|i| i.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{}", self.layer, k, self.method, v, aux);
        }
        s
    }
}

fn check_downstream(stats: &LayerStats, down: &DownstreamStats, w: &Matrix) -> Result<()> {
    if w.shape() != (down.size(), stats.size()) || down.variance.len() != down.size() {
        return Err(Error::Shape(format!(
            "weights {:?} do not connect a layer of {} to a layer of {}",
            w.shape(),
            stats.size(),
            down.size()
        )));
    }
    Ok(())
}

/// `sum_i f'_i^2 w_ik^2 / C_ii` over downstream neurons above the variance floor.
fn impact_sum(down: &DownstreamStats, w: &Matrix, k: usize) -> f64 {
    let col = w.col(k);
    (0..down.size())
        .filter(|&i| down.variance[i] >= VARIANCE_FLOOR)
        .map(|i| down.fprime[i] * down.fprime[i] * col[i] * col[i] / down.variance[i])
        .sum()
}

/// Connection-cut efficiency `E_k` of every neuron (shared by A1 and A2).
pub fn efficiency_connection_cut(
    stats: &LayerStats,
    down: &DownstreamStats,
    w: &Matrix,
    method: Method,
) -> Result<EfficiencyReport> {
    check_downstream(stats, down, w)?;
    if method == Method::A3 {
        return Err(Error::InvalidArgument("A3 uses the spectral efficiency".into()));
    }
    if down.variance.iter().all(|&v| v < VARIANCE_FLOOR) {
        return Err(Error::Degenerate(format!(
            "all downstream variances of layer {} are below {VARIANCE_FLOOR}",
            down.layer
        )));
    }
    let values = (0..stats.size())
        .map(|k| stats.variance(k) * impact_sum(down, w, k))
        .collect();
    Ok(EfficiencyReport {
        layer: stats.layer,
        method,
        values,
        aux_index: vec![None; stats.size()],
    })
}

/// Spectral efficiency `E'_k` of every neuron, with the minimizing eigen index.
pub fn efficiency_covariance(stats: &LayerStats) -> EfficiencyReport {
    let n = stats.size();
    let mut values = vec![f64::INFINITY; n];
    let mut aux_index = vec![None; n];
    for k in 0..n {
        for (i, &lambda) in stats.eigenvalues.iter().enumerate() {
            let v = stats.eigenvectors.get(k, i);
            if v * v <= COMPONENT_FLOOR {
                continue;
            }
            let e = lambda / (v * v);
            if e < values[k] {
                values[k] = e;
                aux_index[k] = Some(i);
            }
        }
    }
    EfficiencyReport {
        layer: stats.layer,
        method: Method::A3,
        values,
        aux_index,
    }
}

/// Efficiency report matching the measure a death method ranks by.
pub fn efficiency_for(
    method: Method,
    stats: &LayerStats,
    down: &DownstreamStats,
    w: &Matrix,
) -> Result<EfficiencyReport> {
    match method {
        Method::A1 | Method::A2 => efficiency_connection_cut(stats, down, w, method),
        Method::A3 => Ok(efficiency_covariance(stats)),
    }
}

/// Approximate dependence `sum_j a_j x_j ~ a_0` among one layer's neurons,
/// used to substitute the signal of `target` when it is removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRelation {
    pub layer: usize,
    pub target: usize,
    pub coefficients: Vec<f64>,
    pub constant: f64,
    pub method: Method,
}

impl LinearRelation {
    pub fn target_coefficient(&self) -> f64 {
        self.coefficients[self.target]
    }

    /// `sum_j a_j x_j - a_0` for one activation vector.
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.coefficients, x) - self.constant
    }

    /// Mean squared residual under the layer statistics:
    /// `a^T C a + (a . <x> - a_0)^2`.
    pub fn mean_square_residual(&self, stats: &LayerStats) -> f64 {
        let ca = stats.covariance.mul_vec(&self.coefficients);
        let bias = dot(&self.coefficients, &stats.mean) - self.constant;
        dot(&self.coefficients, &ca) + bias * bias
    }

    pub fn validate(&self, layer_size: usize) -> Result<()> {
        if self.coefficients.len() != layer_size || self.target >= layer_size {
            return Err(Error::Shape(format!(
                "relation over {} neurons targeting {} does not fit a layer of {layer_size}",
                self.coefficients.len(),
                self.target
            )));
        }
        if !self.constant.is_finite() || self.coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::Degenerate("relation has non-finite coefficients".into()));
        }
        if self.target_coefficient().abs() < COMPONENT_FLOOR {
            return Err(Error::IllConditioned(format!(
                "target coefficient {} is below {COMPONENT_FLOOR}",
                self.target_coefficient()
            )));
        }
        Ok(())
    }
}

fn check_neuron(stats: &LayerStats, k: usize) -> Result<()> {
    if k >= stats.size() {
        return Err(Error::InvalidArgument(format!(
            "neuron {k} not in layer {} of size {}",
            stats.layer,
            stats.size()
        )));
    }
    Ok(())
}

/// `x_k ~ <x_k>`: the neuron is replaced by its mean.
pub fn relation_a1(k: usize, stats: &LayerStats) -> Result<LinearRelation> {
    check_neuron(stats, k)?;
    let mut coefficients = vec![0.0; stats.size()];
    coefficients[k] = 1.0;
    Ok(LinearRelation {
        layer: stats.layer,
        target: k,
        coefficients,
        constant: stats.mean[k],
        method: Method::A1,
    })
}

/// Conditional variance `S_k^2 = (sum_i f'_i^2 w_ik^2 / C_ii)^-1` of `x_k`
/// given the downstream signals.
pub fn conditional_variance(down: &DownstreamStats, w: &Matrix, k: usize) -> Result<f64> {
    let s = impact_sum(down, w, k);
    let s2 = 1.0 / s;
    if s <= 0.0 || !s2.is_finite() {
        return Err(Error::Degenerate(format!(
            "neuron {k} has no downstream influence; conditional variance is unbounded"
        )));
    }
    Ok(s2)
}

/// `x_k ~ M_k`, the conditional-Gaussian mean of `x_k` given the rest of
/// the layer, normalized so that `a_k = 1`.
pub fn relation_a2(k: usize, stats: &LayerStats, down: &DownstreamStats, w: &Matrix) -> Result<LinearRelation> {
    check_neuron(stats, k)?;
    check_downstream(stats, down, w)?;
    let s2 = conditional_variance(down, w, k)?;
    let n = stats.size();
    let mut coefficients = vec![0.0; n];
    let mut constant = 0.0;
    for i in (0..down.size()).filter(|&i| down.variance[i] >= VARIANCE_FLOOR) {
        let g = down.fprime[i] * down.fprime[i] * w.get(i, k) / down.variance[i];
        if g == 0.0 {
            continue;
        }
        let mut mean_signal = 0.0;
        for j in 0..n {
            let wij = w.get(i, j);
            mean_signal += wij * stats.mean[j];
            if j != k {
                coefficients[j] += g * wij;
            }
        }
        constant += g * mean_signal;
    }
    coefficients.iter_mut().for_each(|a| *a *= s2);
    coefficients[k] = 1.0;
    let relation = LinearRelation {
        layer: stats.layer,
        target: k,
        coefficients,
        constant: s2 * constant,
        method: Method::A2,
    };
    relation.validate(n)?;
    Ok(relation)
}

/// `sum_j v_j (x_j - <x_j>) ~ 0` along the eigenvector that attains `E'_k`.
pub fn relation_a3(k: usize, stats: &LayerStats) -> Result<LinearRelation> {
    check_neuron(stats, k)?;
    let report = efficiency_covariance(stats);
    let i = report.aux_index[k]
        .ok_or_else(|| Error::IllConditioned(format!("neuron {k} has no eigencomponent above the floor")))?;
    relation_a3_with(k, stats, i)
}

/// Spectral relation of neuron `k` along eigenvector `i`.
pub fn relation_a3_with(k: usize, stats: &LayerStats, i: usize) -> Result<LinearRelation> {
    check_neuron(stats, k)?;
    let v = stats.eigenvector(i).to_vec();
    let relation = LinearRelation {
        layer: stats.layer,
        target: k,
        constant: dot(&v, &stats.mean),
        coefficients: v,
        method: Method::A3,
    };
    relation.validate(stats.size())?;
    Ok(relation)
}

/// Relation for neuron `k` under the given death method.
pub fn relation_for(
    method: Method,
    k: usize,
    stats: &LayerStats,
    down: &DownstreamStats,
    w: &Matrix,
) -> Result<LinearRelation> {
    match method {
        Method::A1 => relation_a1(k, stats),
        Method::A2 => relation_a2(k, stats, down, w),
        Method::A3 => relation_a3(k, stats),
    }
}
