//! Brute-force ground truth: the measured loss change when a neuron is
//! removed, per-layer scans pairing it with the predicted efficiency, and
//! least-squares fits of efficiency against that loss change.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::efficiency::{efficiency_for, relation_for, LinearRelation, Method};
use crate::error::{Error, Result};
use crate::netcore::{LossKind, Network};
use crate::neuronstats::{collect_stats, StatsConfig};
use crate::surgery::{apply_death, DeathPlan};

/// Mean loss of `net` over every sample of `data`.
pub fn mean_loss(net: &Network, data: &Dataset, loss: LossKind) -> Result<f64> {
    net.mean_loss(loss, data.targets())
}

/// `<H>` after removing `relation.target` minus `<H>` before, on `data`.
/// The input network is not modified.
pub fn delta_loss_on_removal(net: &Network, data: &Dataset, loss: LossKind, relation: &LinearRelation) -> Result<f64> {
    let base = mean_loss(net, data, loss)?;
    delta_loss_from_base(net, data, loss, relation, base)
}

fn delta_loss_from_base(
    net: &Network,
    data: &Dataset,
    loss: LossKind,
    relation: &LinearRelation,
    base: f64,
) -> Result<f64> {
    let mut reduced = net.clone();
    let plan = DeathPlan {
        layer: relation.layer,
        neuron: relation.target,
        relation: relation.clone(),
        exact: false,
    };
    apply_death(&mut reduced, &plan)?;
    Ok(mean_loss(&reduced, data, loss)? - base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub neuron: usize,
    pub efficiency: f64,
    pub method: Method,
    pub delta_loss: f64,
}

/// Rows of a layer scan, plus neurons skipped because their relation was
/// degenerate or ill-conditioned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerScan {
    pub layer: usize,
    pub rows: Vec<ScanRow>,
    pub skipped: Vec<(usize, String)>,
}

impl LayerScan {
    /// `seed,step,layer,neuron,method,efficiency,delta_loss` rows (no header).
    pub fn write_csv_rows(&self, out: &mut String, seed: u64, step: u64) {
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{seed},{step},{},{},{},{},{}",
                self.layer, r.neuron, r.method, r.efficiency, r.delta_loss
            );
        }
    }

    /// Least-efficient row, ties by lowest neuron index.
    pub fn least_efficient(&self) -> Option<&ScanRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.efficiency.total_cmp(&b.efficiency).then(a.neuron.cmp(&b.neuron)))
    }

    pub fn mean_delta_loss(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        Some(self.rows.iter().map(|r| r.delta_loss).sum::<f64>() / self.rows.len() as f64)
    }
}

pub const SCAN_CSV_HEADER: &str = "seed,step,layer,neuron,method,efficiency,delta_loss\n";

/// Efficiency and measured removal cost of every neuron of hidden `layer`,
/// both computed from one statistics snapshot on `data`.
pub fn scan_layer(
    net: &Network,
    data: &Dataset,
    layer: usize,
    method: Method,
    loss: LossKind,
    stats_config: &StatsConfig,
) -> Result<LayerScan> {
    let (stats, down) = collect_stats(net, data, layer, stats_config)?;
    let report = efficiency_for(method, &stats, &down, net.weights(layer))?;
    let eval = data.head(stats_config.max_samples);
    let base = mean_loss(net, &eval, loss)?;
    let mut scan = LayerScan {
        layer,
        ..Default::default()
    };
    for k in 0..stats.size() {
        let efficiency = report.values[k];
        let relation = match relation_for(method, k, &stats, &down, net.weights(layer)) {
            Ok(r) if efficiency.is_finite() => r,
            Ok(_) => {
                scan.skipped.push((k, "no usable eigencomponent".into()));
                continue;
            }
            Err(e) if e.is_numerical() => {
                scan.skipped.push((k, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let delta_loss = delta_loss_from_base(net, &eval, loss, &relation, base)?;
        scan.rows.push(ScanRow {
            neuron: k,
            efficiency,
            method,
            delta_loss,
        });
    }
    Ok(scan)
}

/// Ordinary least squares `efficiency = intercept + slope * delta_loss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub intercept: f64,
    pub slope: f64,
    pub n: usize,
    pub rss: f64,
}

/// Fits efficiency on loss change over `(delta_loss, efficiency)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "a line fit needs at least 2 points, got {n}"
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Degenerate("non-finite point in line fit".into()));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "all loss changes are identical; slope undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    Ok(SlopeFit {
        intercept,
        slope,
        n,
        rss,
    })
}

/// Fits the rows of one or more scans.
pub fn fit_rows<'a>(rows: impl IntoIterator<Item = &'a ScanRow>) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = rows.into_iter().map(|r| (r.delta_loss, r.efficiency)).collect();
    fit_slope(&points)
}

/// Pearson correlation of paired samples; `None` when either side is constant.
pub fn pearson(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let nf = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_line() {
        let f = fit_slope(&[(0.0, 1.0), (1.0, 3.0)]).unwrap();
        assert_eq!((f.intercept, f.slope, f.n), (1.0, 2.0, 2));
        assert!(f.rss < 1e-30);
    }

    #[test]
    fn constant_efficiency_has_zero_slope() {
        let f = fit_slope(&[(0.0, 4.0), (1.0, 4.0), (3.0, 4.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.intercept, 4.0);
    }

    #[test]
    fn singular_fits_rejected() {
        assert!(fit_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(fit_slope(&[(1.0, 1.0)]).is_err());
        assert!(fit_slope(&[(1.0, f64::NAN), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn pearson_signs() {
        assert!((pearson(&[(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[(0.0, 0.0), (1.0, -2.0), (2.0, -4.0)]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[(0.0, 1.0), (1.0, 1.0)]), None);
    }

    #[test]
    fn scan_least_efficient_and_mean() {
        let scan = LayerScan {
            layer: 2,
            rows: vec![
                ScanRow {
                    neuron: 0,
                    efficiency: 0.5,
                    method: Method::A1,
                    delta_loss: 0.2,
                },
                ScanRow {
                    neuron: 1,
                    efficiency: 0.1,
                    method: Method::A1,
                    delta_loss: 0.4,
                },
                ScanRow {
                    neuron: 2,
                    efficiency: 0.1,
                    method: Method::A1,
                    delta_loss: 0.0,
                },
            ],
            skipped: vec![],
        };
        assert_eq!(scan.least_efficient().unwrap().neuron, 1);
        assert!((scan.mean_delta_loss().unwrap() - 0.2).abs() < 1e-15);
        let mut s = String::new();
        scan.write_csv_rows(&mut s, 7, 100);
        assert!(s.starts_with("7,100,2,0,A1,0.5,0.2\n"));
    }
}
