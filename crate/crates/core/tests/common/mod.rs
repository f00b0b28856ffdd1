#![allow(dead_code)]

use plausible_ce::actionspace::{ActionConfig, ActionSpace, MilpConstants};
use plausible_ce::bench::Pipeline;
use plausible_ce::classifiers::{Classifier, LinearKind, LinearModel};
use plausible_ce::data::{EncodedDataset, EncodingMap};
use plausible_ce::formulations::Problem;
use plausible_ce::stats::LofContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A solved-size random instance: correlated Gaussian data, a random linear
/// classifier, a positive reference set and one rejected query.
pub struct Instance {
    pub pipe: Pipeline,
    pub lof: LofContext,
    pub space: ActionSpace,
    pub constants: MilpConstants,
    pub lambda: f64,
}

impl Instance {
    pub fn problem(&self) -> Problem<'_> {
        self.pipe.problem(&self.lof, &self.space, &self.constants, self.lambda, 0.0)
    }
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mix: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0)).collect();
            (0..d).map(|j| z[j] + 0.5 * (0..d).map(|k| mix[j][k] * z[k]).sum::<f64>()).collect()
        })
        .collect()
}

/// Random instance with `D ≤ max_d`, grid size 3 (so `I_d ≤ 4`) and
/// `N ≤ max_n`. Returns `None` when the draw has no rejected point or too
/// few positives.
pub fn random_instance(seed: u64, max_d: usize, max_n: usize) -> Option<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=max_d);
    let rows = gaussian_rows(&mut rng, 80, d);
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let b = rng.gen_range(-0.5..0.5);
    let model = LinearModel { kind: LinearKind::Logistic, weights: w, intercept: b, scaler: None, converged: true };
    let labels: Vec<i8> = rows.iter().map(|r| if model.decision(r) >= 0.0 { 1 } else { -1 }).collect();
    let data = EncodedDataset { rows, labels, map: EncodingMap::all_numeric(d) };
    let train = data.subset(&(0..60).collect::<Vec<_>>());
    let test = data.subset(&(60..80).collect::<Vec<_>>());
    let clf = Classifier::Linear(model);
    let pipe = Pipeline::from_parts(train, test, clf, None).ok()?;
    let q = *pipe.rejected(1).ok()?.first()?;
    let positives = pipe.train.labels.iter().filter(|&&y| y == 1).count();
    let n = rng.gen_range(2..=max_n).min(positives);
    if n < 2 {
        return None;
    }
    let lof = pipe.reference_set(n, seed).ok()?;
    let cfg = ActionConfig { grid_size: 3, max_changes: rng.gen_range(1..=d), ..Default::default() };
    let x_bar = pipe.test.rows[q].clone();
    let (space, constants) = pipe.instance(&x_bar, &lof, &cfg).ok()?;
    let lambda = [0.05, 0.2, 1.0, 3.0][rng.gen_range(0..4)];
    Some(Instance { pipe, lof, space, constants, lambda })
}

/// Textbook k-LOF of an out-of-sample query, computed from scratch.
pub fn naive_lof(points: &[Vec<f64>], scales: &[f64], q: &[f64], k: usize) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(scales).map(|((x, y), s)| (x - y).abs() / s).sum::<f64>();
    let neighbours = |i: Option<usize>, p: &[f64]| {
        let mut v: Vec<(usize, f64)> =
            (0..points.len()).filter(|&j| Some(j) != i).map(|j| (j, dist(p, &points[j]))).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    };
    let kdist = |j: usize| neighbours(Some(j), &points[j])[k - 1].1;
    let lrd_of = |nb: &[(usize, f64)]| k as f64 / nb.iter().map(|&(j, d)| d.max(kdist(j))).sum::<f64>();
    let nq = neighbours(None, q);
    let lrd_q = lrd_of(&nq);
    nq.iter().map(|&(j, _)| lrd_of(&neighbours(Some(j), &points[j])) / lrd_q).sum::<f64>() / k as f64
}
