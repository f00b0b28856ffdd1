//! Finite per-feature action grids around a rejected instance and the
//! distance constants the MILP needs.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, EncodingMap, FeatureKind};
use crate::error::{Error, Result};
use crate::stats::LofContext;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Free,
    Increase,
    Decrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureRule {
    pub mutable: bool,
    pub direction: Direction,
}

impl Default for FeatureRule {
    fn default() -> Self {
        Self { mutable: true, direction: Direction::Free }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionConfig {
    /// Number of training quantiles offered per numeric feature.
    pub grid_size: usize,
    /// Maximum number of features an action may change.
    pub max_changes: usize,
    pub features: BTreeMap<String, FeatureRule>,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self { grid_size: 10, max_changes: 4, features: BTreeMap::new() }
    }
}

/// One allowed change of a feature, as a sparse displacement of encoded columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Offset for numeric features, target category index for categoricals.
    pub value: f64,
    pub displacement: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDim {
    pub name: String,
    pub kind: FeatureKind,
    pub columns: Range<usize>,
    pub candidates: Vec<Candidate>,
    /// Index of the no-op candidate.
    pub zero: usize,
    pub mutable: bool,
    pub direction: Direction,
    /// Category labels of a categorical feature.
    pub categories: Vec<String>,
}

impl ActionDim {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Human-readable label of candidate `i`.
    pub fn label(&self, i: usize) -> String {
        let v = self.candidates[i].value;
        match self.kind {
            FeatureKind::Categorical => self.categories.get(v as usize).cloned().unwrap_or_else(|| v.to_string()),
            _ => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    pub x_bar: Vec<f64>,
    pub dims: Vec<ActionDim>,
    pub max_changes: usize,
    offsets: Vec<usize>,
}

/// Values at sorted positions `round(q · (n − 1))` for `q = j / (g − 1)`.
pub fn quantile_grid(column: &[f64], g: usize) -> Vec<f64> {
    let mut v = column.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut out: Vec<f64> = if g == 1 {
        vec![v[(0.5 * (n - 1) as f64).round() as usize]]
    } else {
        (0..g).map(|j| v[((j as f64 / (g - 1) as f64) * (n - 1) as f64).round() as usize]).collect()
    };
    out.dedup();
    out
}

impl ActionSpace {
    pub fn new(x_bar: Vec<f64>, dims: Vec<ActionDim>, max_changes: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        let mut next_col = 0;
        for d in &dims {
            if d.columns.start != next_col {
                return Err(Error::Config(format!("action dimension `{}` does not continue the column layout", d.name)));
            }
            next_col = d.columns.end;
            if d.zero >= d.len() || !d.candidates[d.zero].displacement.is_empty() {
                return Err(Error::Config(format!("action dimension `{}` lacks a no-op candidate", d.name)));
            }
            offsets.push(acc);
            acc += d.len();
        }
        offsets.push(acc);
        if next_col != x_bar.len() {
            return Err(Error::WidthMismatch { expected: next_col, got: x_bar.len() });
        }
        Ok(Self { x_bar, dims, max_changes, offsets })
    }

    pub fn width(&self) -> usize {
        self.x_bar.len()
    }

    /// Total number of candidates `Σ_d I_d`.
    pub fn n_candidates(&self) -> usize {
        self.offsets[self.dims.len()]
    }

    /// Position of candidate `i` of dimension `d` in the flat candidate list.
    pub fn flat(&self, d: usize, i: usize) -> usize {
        self.offsets[d] + i
    }

    /// `Π_d I_d`, saturating.
    pub fn size(&self) -> u128 {
        self.dims.iter().fold(1u128, |a, d| a.saturating_mul(d.len() as u128))
    }

    pub fn zero_choice(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.zero).collect()
    }

    pub fn changes(&self, choice: &[usize]) -> usize {
        self.dims.iter().zip(choice).filter(|(d, &i)| i != d.zero).count()
    }

    pub fn displacement(&self, choice: &[usize]) -> Vec<f64> {
        let mut a = vec![0.0; self.width()];
        for (d, &i) in self.dims.iter().zip(choice) {
            for &(c, v) in &d.candidates[i].displacement {
                a[c] += v;
            }
        }
        a
    }

    pub fn counterfactual(&self, choice: &[usize]) -> Vec<f64> {
        self.x_bar.iter().zip(self.displacement(choice)).map(|(x, a)| x + a).collect()
    }

    /// Calls `f` on every choice vector in lexicographic order.
    pub fn for_each_choice(&self, mut f: impl FnMut(&[usize])) {
        let mut choice = vec![0; self.dims.len()];
        loop {
            f(&choice);
            let mut d = self.dims.len();
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                choice[d] += 1;
                if choice[d] < self.dims[d].len() {
                    break;
                }
                choice[d] = 0;
            }
        }
    }
}

/// Builds the action grid for `x_bar` from the training distribution.
pub fn build_action_space(x_bar: &[f64], train: &EncodedDataset, cfg: &ActionConfig) -> Result<ActionSpace> {
    let map: &EncodingMap = &train.map;
    if x_bar.len() != map.width {
        return Err(Error::WidthMismatch { expected: map.width, got: x_bar.len() });
    }
    if cfg.grid_size == 0 {
        return Err(Error::Config("grid_size must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::InsufficientData("action grids need training rows".into()));
    }
    for name in cfg.features.keys() {
        if !map.groups.iter().any(|g| &g.name == name) {
            return Err(Error::Config(format!("unknown feature `{name}` in action config")));
        }
    }
    let mut dims = Vec::with_capacity(map.groups.len());
    for g in &map.groups {
        let rule = cfg.features.get(&g.name).copied().unwrap_or_default();
        let start = g.columns.start;
        let dim = match g.kind {
            FeatureKind::Categorical => {
                if rule.direction != Direction::Free {
                    return Err(Error::Config(format!("categorical feature `{}` cannot have a direction", g.name)));
                }
                let cur = (0..g.columns.len())
                    .find(|&k| x_bar[start + k] == 1.0)
                    .ok_or_else(|| Error::Precondition(format!("feature `{}` is not one-hot in the instance", g.name)))?;
                let ks: Vec<usize> = if rule.mutable { (0..g.columns.len()).collect() } else { vec![cur] };
                let candidates = ks
                    .iter()
                    .map(|&k| Candidate {
                        value: k as f64,
                        displacement: if k == cur { Vec::new() } else { vec![(start + cur, -1.0), (start + k, 1.0)] },
                    })
                    .collect();
                let zero = ks.iter().position(|&k| k == cur).expect("current category listed");
                ActionDim {
                    name: g.name.clone(),
                    kind: g.kind,
                    columns: g.columns.clone(),
                    candidates,
                    zero,
                    mutable: rule.mutable,
                    direction: rule.direction,
                    categories: g.categories.clone(),
                }
            }
            FeatureKind::Numeric | FeatureKind::Binary => {
                let col: Vec<f64> = train.rows.iter().map(|r| r[start]).collect();
                let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                let x = x_bar[start];
                let mut offs: Vec<f64> = vec![0.0];
                if rule.mutable {
                    let grid = if g.kind == FeatureKind::Binary { vec![0.0, 1.0] } else { quantile_grid(&col, cfg.grid_size) };
                    for v in grid {
                        if v < lo || v > hi {
                            continue;
                        }
                        let a = v - x;
                        let ok = match rule.direction {
                            Direction::Free => true,
                            Direction::Increase => a >= 0.0,
                            Direction::Decrease => a <= 0.0,
                        };
                        if ok && a != 0.0 {
                            offs.push(a);
                        }
                    }
                }
                offs.sort_by(f64::total_cmp);
                offs.dedup();
                let zero = offs.iter().position(|&a| a == 0.0).expect("zero offset kept");
                let candidates = offs
                    .iter()
                    .map(|&a| Candidate { value: a, displacement: if a == 0.0 { Vec::new() } else { vec![(start, a)] } })
                    .collect();
                ActionDim {
                    name: g.name.clone(),
                    kind: g.kind,
                    columns: g.columns.clone(),
                    candidates,
                    zero,
                    mutable: rule.mutable,
                    direction: rule.direction,
                    categories: g.categories.clone(),
                }
            }
        };
        dims.push(dim);
    }
    ActionSpace::new(x_bar.to_vec(), dims, cfg.max_changes)
}

/// Distance tables between the candidate grid and the reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpConstants {
    /// `c[n][j]`: distance along candidate `j`'s feature from `x̄ + a_j` to `x⁽ⁿ⁾`.
    pub c: Vec<Vec<f64>>,
    /// `C_n`: largest distance from any action's counterfactual to `x⁽ⁿ⁾`.
    pub big_c: Vec<f64>,
    /// `max_n C_n`.
    pub big_m: f64,
}

pub fn precompute_constants(space: &ActionSpace, lof: &LofContext) -> Result<MilpConstants> {
    let metric = lof.metric();
    if metric.width() != space.width() {
        return Err(Error::WidthMismatch { expected: space.width(), got: metric.width() });
    }
    let mut c = Vec::with_capacity(lof.len());
    let mut big_c = Vec::with_capacity(lof.len());
    for p in lof.points() {
        let mut row = Vec::with_capacity(space.n_candidates());
        let mut total = 0.0;
        for dim in &space.dims {
            let mut best = 0.0_f64;
            for cand in &dim.candidates {
                let mut v = 0.0;
                for col in dim.columns.clone() {
                    let shift = cand.displacement.iter().filter(|e| e.0 == col).map(|e| e.1).sum::<f64>();
                    v += metric.axis(col, space.x_bar[col] + shift, p[col]);
                }
                best = best.max(v);
                row.push(v);
            }
            total += best;
        }
        c.push(row);
        big_c.push(total);
    }
    let big_m = big_c.iter().copied().fold(0.0, f64::max);
    Ok(MilpConstants { c, big_c, big_m })
}

impl MilpConstants {
    /// `Σ_d c[n][choice_d]`, the distance from the counterfactual to `x⁽ⁿ⁾`.
    pub fn distance(&self, space: &ActionSpace, n: usize, choice: &[usize]) -> f64 {
        choice.iter().enumerate().map(|(d, &i)| self.c[n][space.flat(d, i)]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetSchema, FeatureSpec};
    use crate::stats::DeltaMetric;

    fn numeric_train(col: &[f64]) -> EncodedDataset {
        EncodedDataset {
            rows: col.iter().map(|&v| vec![v]).collect(),
            labels: vec![1; col.len()],
            map: EncodingMap::all_numeric(1),
        }
    }

    fn offsets(space: &ActionSpace) -> Vec<f64> {
        space.dims[0].candidates.iter().map(|c| c.value).collect()
    }

    #[test]
    fn quantile_offsets_around_instance() {
        let cfg = ActionConfig { grid_size: 3, ..Default::default() };
        let space = build_action_space(&[2.0], &numeric_train(&[1.0, 2.0, 3.0]), &cfg).unwrap();
        assert_eq!(offsets(&space), vec![-1.0, 0.0, 1.0]);
        assert_eq!(space.dims[0].zero, 1);
    }

    #[test]
    fn direction_and_immutability_filters() {
        let mut cfg = ActionConfig { grid_size: 3, ..Default::default() };
        cfg.features.insert("x0".into(), FeatureRule { mutable: true, direction: Direction::Increase });
        let space = build_action_space(&[2.0], &numeric_train(&[1.0, 2.0, 3.0]), &cfg).unwrap();
        assert_eq!(offsets(&space), vec![0.0, 1.0]);
        cfg.features.insert("x0".into(), FeatureRule { mutable: false, direction: Direction::Free });
        let space = build_action_space(&[2.0], &numeric_train(&[1.0, 2.0, 3.0]), &cfg).unwrap();
        assert_eq!(offsets(&space), vec![0.0]);
        cfg.features.insert("nope".into(), FeatureRule::default());
        assert!(build_action_space(&[2.0], &numeric_train(&[1.0, 2.0, 3.0]), &cfg).is_err());
    }

    #[test]
    fn categorical_candidates_switch_one_column() {
        let schema = DatasetSchema {
            features: vec![FeatureSpec::categorical("c", ["a", "b", "c"]), FeatureSpec::binary("f")],
            target: "y".into(),
            positive_label: "1".into(),
            missing_tokens: vec![],
        };
        let map = EncodingMap::from_schema(&schema);
        let train = EncodedDataset {
            rows: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]],
            labels: vec![1, -1],
            map,
        };
        let space = build_action_space(&[0.0, 1.0, 0.0, 1.0], &train, &ActionConfig::default()).unwrap();
        let cat = &space.dims[0];
        assert_eq!(cat.zero, 1);
        assert_eq!(cat.candidates[2].displacement, vec![(1, -1.0), (2, 1.0)]);
        assert_eq!(space.counterfactual(&[2, 1]), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(space.counterfactual(&[0, 0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(space.changes(&[0, 0]), 2);
        assert_eq!(space.size(), 6);
    }

    #[test]
    fn singleton_space_constants() {
        let cfg = ActionConfig { grid_size: 1, ..Default::default() };
        let mut rule = BTreeMap::new();
        rule.insert("x0".into(), FeatureRule { mutable: false, direction: Direction::Free });
        let cfg = ActionConfig { features: rule, ..cfg };
        let space = build_action_space(&[0.5], &numeric_train(&[0.0, 3.0]), &cfg).unwrap();
        let lof = LofContext::new(vec![vec![0.0], vec![3.0]], DeltaMetric::unit(1)).unwrap();
        let k = precompute_constants(&space, &lof).unwrap();
        assert_eq!(k.c, vec![vec![0.5], vec![2.5]]);
        assert_eq!(k.big_c, vec![0.5, 2.5]);
        assert_eq!(k.big_m, 2.5);
    }

    #[test]
    fn hand_constants_one_dimension() {
        // x̄ = 0, A = {0, 2}, x⁽¹⁾ = 1: both candidates are at distance 1
        let dim = ActionDim {
            name: "x0".into(),
            kind: FeatureKind::Numeric,
            columns: 0..1,
            candidates: vec![
                Candidate { value: 0.0, displacement: vec![] },
                Candidate { value: 2.0, displacement: vec![(0, 2.0)] },
            ],
            zero: 0,
            mutable: true,
            direction: Direction::Free,
            categories: Vec::new(),
        };
        let space = ActionSpace::new(vec![0.0], vec![dim], 1).unwrap();
        let lof = LofContext::new(vec![vec![1.0], vec![5.0]], DeltaMetric::unit(1)).unwrap();
        let k = precompute_constants(&space, &lof).unwrap();
        assert_eq!(k.c[0], vec![1.0, 1.0]);
        assert_eq!(k.big_c[0], 1.0);
        assert_eq!(k.big_m, 5.0);
    }

    #[test]
    fn lexicographic_enumeration() {
        let mk = |n: usize, col: usize| ActionDim {
            name: format!("x{col}"),
            kind: FeatureKind::Numeric,
            columns: col..col + 1,
            candidates: (0..n)
                .map(|i| Candidate { value: i as f64, displacement: if i == 0 { vec![] } else { vec![(col, i as f64)] } })
                .collect(),
            zero: 0,
            mutable: true,
            direction: Direction::Free,
            categories: Vec::new(),
        };
        let space = ActionSpace::new(vec![0.0, 0.0], vec![mk(2, 0), mk(3, 1)], 2).unwrap();
        let mut seen = Vec::new();
        space.for_each_choice(|c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]);
    }
}
