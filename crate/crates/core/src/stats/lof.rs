use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{by_distance, knn, reachability, DeltaMetric};
use crate::error::{Error, Result};

/// Reference set `X` with its pairwise distances and 1-neighbour tables.
#[derive(Debug, Clone)]
pub struct LofContext {
    points: Vec<Vec<f64>>,
    source_rows: Vec<usize>,
    metric: DeltaMetric,
    dist: Vec<f64>,
    d1: Vec<f64>,
    lrd1: Vec<f64>,
}

impl LofContext {
    /// Builds the context over `points`, which must be pairwise distinct.
    pub fn new(points: Vec<Vec<f64>>, metric: DeltaMetric) -> Result<Self> {
        let n = points.len();
        let source_rows = (0..n).collect();
        Self::with_sources(points, source_rows, metric)
    }

    fn with_sources(points: Vec<Vec<f64>>, source_rows: Vec<usize>, metric: DeltaMetric) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("reference set needs at least 2 points, got {n}")));
        }
        if let Some(p) = points.iter().find(|p| p.len() != metric.width()) {
            return Err(Error::WidthMismatch { expected: metric.width(), got: p.len() });
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = metric.distance(&points[i], &points[j]);
                if v == 0.0 {
                    return Err(Error::InvalidParameter(format!("reference points {i} and {j} coincide")));
                }
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        let mut ctx = Self { points, source_rows, metric, dist, d1: Vec::new(), lrd1: Vec::new() };
        ctx.d1 = ctx.k_distances(1)?;
        ctx.lrd1 = ctx.lrd_table(1, &ctx.d1)?;
        Ok(ctx)
    }

    /// Samples `n` distinct rows labelled +1 in a seeded random order. Exact
    /// duplicates of an already chosen row are skipped and replaced by the
    /// next row in the order.
    pub fn sample(rows: &[Vec<f64>], labels: &[i8], n: usize, metric: DeltaMetric, seed: u64) -> Result<Self> {
        let mut candidates: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == 1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        candidates.shuffle(&mut rng);
        let mut chosen: Vec<usize> = Vec::with_capacity(n);
        for i in candidates {
            if chosen.len() == n {
                break;
            }
            if chosen.iter().all(|&c| rows[c] != rows[i]) {
                chosen.push(i);
            }
        }
        if chosen.len() < n {
            return Err(Error::InsufficientData(format!(
                "only {} distinct positive rows available for a reference set of {n}",
                chosen.len()
            )));
        }
        let points = chosen.iter().map(|&i| rows[i].clone()).collect();
        Self::with_sources(points, chosen, metric)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Row indices of the reference points in the data they were sampled from.
    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    pub fn metric(&self) -> &DeltaMetric {
        &self.metric
    }

    pub fn d1(&self) -> &[f64] {
        &self.d1
    }

    pub fn lrd1(&self) -> &[f64] {
        &self.lrd1
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    /// Neighbours of reference point `i` within `X`, excluding itself.
    fn inner_knn(&self, i: usize, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.len()).filter(|&j| j != i).map(|j| (j, self.pair(i, j))).collect();
        all.sort_by(by_distance);
        all.truncate(k);
        all
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k >= self.len() {
            return Err(Error::InvalidParameter(format!("k = {k} needs 1 <= k < |X| = {}", self.len())));
        }
        Ok(())
    }

    /// `d_k` of every reference point.
    pub fn k_distances(&self, k: usize) -> Result<Vec<f64>> {
        self.check_k(k)?;
        Ok((0..self.len()).map(|i| self.inner_knn(i, k)[k - 1].1).collect())
    }

    fn lrd_table(&self, k: usize, dk: &[f64]) -> Result<Vec<f64>> {
        self.check_k(k)?;
        Ok((0..self.len())
            .map(|i| {
                let nb = self.inner_knn(i, k);
                let s: f64 = nb.iter().map(|&(j, d)| reachability(d, dk[j])).sum();
                nb.len() as f64 / s
            })
            .collect())
    }

    /// `lrd_k` of every reference point.
    pub fn lrd(&self, k: usize) -> Result<Vec<f64>> {
        let dk = self.k_distances(k)?;
        self.lrd_table(k, &dk)
    }

    /// Nearest reference point to `query` with its distance (ties to the
    /// lower index).
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        knn(&self.metric, query, &self.points, 1, None).expect("non-empty reference set")[0]
    }

    /// k-LOF of an out-of-sample `query` with respect to `X`.
    pub fn lof(&self, query: &[f64], k: usize) -> Result<f64> {
        self.check_k(k)?;
        let dk = self.k_distances(k)?;
        let lrd = self.lrd_table(k, &dk)?;
        let nb = knn(&self.metric, query, &self.points, k, None)?;
        let reach: f64 = nb.iter().map(|&(j, d)| reachability(d, dk[j])).sum();
        let lrd_q = nb.len() as f64 / reach;
        Ok(nb.iter().map(|&(j, _)| lrd[j] / lrd_q).sum::<f64>() / nb.len() as f64)
    }

    /// The 1-LOF cost term `lrd_1(x⁽ⁿ*⁾) · rd_1(point, x⁽ⁿ*⁾)` and its `n*`.
    pub fn q1_surrogate(&self, point: &[f64]) -> (usize, f64) {
        let (n, d) = self.nearest(point);
        (n, self.lrd1[n] * reachability(d, self.d1[n]))
    }

    /// Dumps the `d_1` and `lrd_1` tables.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("n,source_row,d1,lrd1\n");
        for i in 0..self.len() {
            out.push_str(&format!("{i},{},{},{}\n", self.source_rows[i], self.d1[i], self.lrd1[i]));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
