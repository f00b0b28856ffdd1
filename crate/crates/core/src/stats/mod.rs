//! Plausibility statistics: Mahalanobis geometry, a decomposable per-axis
//! distance, and local outlier factors over a reference set.

mod lof;
mod mahalanobis;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lof::LofContext;
pub use mahalanobis::{build_mahalanobis, covariance, default_ridge, MahalanobisContext};

/// Weighted ℓ1 distance `Δ(x, x') = Σ_d |x_d − x'_d| / s_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMetric {
    scales: Vec<f64>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl DeltaMetric {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("distance scales must be positive, got {s}")));
        }
        Ok(Self { scales })
    }

    pub fn unit(width: usize) -> Self {
        Self { scales: vec![1.0; width] }
    }

    /// Scale of each column: median absolute deviation, falling back to the
    /// population standard deviation and then to 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Err(Error::InsufficientData("cannot fit distance scales on zero rows".into()));
        }
        let n = rows.len() as f64;
        let scales = (0..width)
            .map(|d| {
                let mut col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
                col.sort_by(f64::total_cmp);
                let med = median(&col);
                let mut dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
                dev.sort_by(f64::total_cmp);
                let mad = median(&dev);
                if mad > 0.0 {
                    return mad;
                }
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { scales })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn width(&self) -> usize {
        self.scales.len()
    }

    pub fn axis(&self, d: usize, u: f64, v: f64) -> f64 {
        (u - v).abs() / self.scales[d]
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.scales).map(|((a, b), s)| (a - b).abs() / s).sum()
    }
}

/// Orders `(index, distance)` pairs by distance, then by index.
pub(crate) fn by_distance(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// The `k` nearest points of `set` to `query`, ascending by Δ with ties to
/// the lower index. `exclude` removes one index, typically the query itself.
pub fn knn(
    metric: &DeltaMetric,
    query: &[f64],
    set: &[Vec<f64>],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<(usize, f64)>> {
    let available = set.len() - usize::from(exclude.is_some_and(|e| e < set.len()));
    if k == 0 || k > available {
        return Err(Error::InvalidParameter(format!("k = {k} but only {available} neighbours are available")));
    }
    let mut all: Vec<(usize, f64)> = set
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, p)| (i, metric.distance(query, p)))
        .collect();
    all.sort_by(by_distance);
    all.truncate(k);
    Ok(all)
}

/// `rd_k(x, x') = max(Δ(x, x'), d_k(x'))`.
pub fn reachability(delta: f64, k_distance: f64) -> f64 {
    delta.max(k_distance)
}
