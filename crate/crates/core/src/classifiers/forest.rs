use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Fraction of positive training samples that reached the leaf.
    Leaf { prob: f64 },
}

/// A binary tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// Leaf reached by the conditions on the way down from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPath {
    pub node: usize,
    pub prob: f64,
    /// `(feature, went_left, threshold)` for each split on the path.
    pub conditions: Vec<(usize, bool, f64)>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { prob } => prob,
            Node::Split { .. } => unreachable!("leaf_index stops at a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// All leaves in depth-first (left before right) order.
    pub fn leaves(&self) -> Vec<LeafPath> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((i, conds)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { prob } => out.push(LeafPath { node: i, prob, conditions: conds }),
                Node::Split { feature, threshold, left, right } => {
                    let mut r = conds.clone();
                    r.push((feature, false, threshold));
                    let mut l = conds;
                    l.push((feature, true, threshold));
                    stack.push((right, r));
                    stack.push((left, l));
                }
            }
        }
        out
    }

    /// Checks the arena is a proper binary tree over `width` features.
    pub fn check(&self, width: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::Schema("tree has no nodes".into()));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if i >= n || seen[i] {
                return Err(Error::Schema(format!("tree node {i} is missing or shared")));
            }
            seen[i] = true;
            match self.nodes[i] {
                Node::Leaf { prob } if !(0.0..=1.0).contains(&prob) => {
                    return Err(Error::Schema(format!("leaf probability {prob} outside [0, 1]")));
                }
                Node::Leaf { .. } => {}
                Node::Split { feature, threshold, left, right } => {
                    if feature >= width || !threshold.is_finite() {
                        return Err(Error::Schema(format!("split on invalid column {feature}")));
                    }
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Schema("tree has unreachable nodes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub max_depth: usize,
}

impl Forest {
    pub fn mean_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 6, seed: 0 }
    }
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    pos: &'a [bool],
    width: usize,
    mtry: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.pos[i]).count();
        self.nodes.push(Node::Leaf { prob: pos as f64 / idx.len() as f64 });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, weighted impurity)` over `features`.
    fn best_split(&self, idx: &[usize], features: impl Iterator<Item = usize>) -> Option<(usize, f64, f64)> {
        let total_pos = idx.iter().filter(|&&i| self.pos[i]).count();
        let n = idx.len();
        let mut best: Option<(usize, f64, f64)> = None;
        for f in features {
            let mut vals: Vec<(f64, bool)> = idx.iter().map(|&i| (self.rows[i][f], self.pos[i])).collect();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(vals[k - 1].1);
                if vals[k].0 == vals[k - 1].0 {
                    continue;
                }
                let right_pos = total_pos - left_pos;
                let imp = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(right_pos, n - k)) / n as f64;
                if best.is_none_or(|b| imp < b.2) {
                    best = Some((f, 0.5 * (vals[k - 1].0 + vals[k].0), imp));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = idx.iter().filter(|&&i| self.pos[i]).count();
        if depth >= self.max_depth || pos == 0 || pos == idx.len() || idx.len() < 2 {
            return self.leaf(idx);
        }
        let parent = gini(pos, idx.len());
        // fall back to every feature when the sampled ones cannot reduce impurity
        let improves = |s: &(usize, f64, f64)| s.2 < parent - 1e-12;
        let drawn = sample(rng, self.width, self.mtry).into_vec();
        let found = self.best_split(idx, drawn.into_iter()).filter(improves);
        let Some((feature, threshold, _)) = found.or_else(|| self.best_split(idx, 0..self.width).filter(improves)) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { prob: 0.0 });
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Bagged CART trees with Gini splits and `⌈√width⌉` candidate features per node.
pub fn train_forest(rows: &[Vec<f64>], labels: &[i8], params: &ForestParams) -> Result<Forest> {
    if params.n_trees == 0 || params.max_depth == 0 {
        return Err(Error::InvalidParameter("forest needs at least one tree and depth >= 1".into()));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("forest training needs at least one row".into()));
    }
    let width = rows[0].len();
    let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    let mtry = ((width as f64).sqrt().ceil() as usize).clamp(1, width.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = rows.len();
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut b = Builder { rows, pos: &pos, width, mtry, max_depth: params.max_depth, nodes: Vec::new() };
        b.grow(&boot, 0, &mut rng);
        trees.push(Tree { nodes: b.nodes });
    }
    Ok(Forest { trees, n_features: width, max_depth: params.max_depth })
}
