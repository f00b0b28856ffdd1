//! Classifier families whose decision functions the MILP encodes exactly:
//! logistic regression, linear SVM on standardized inputs, and random forests.

mod forest;
mod logistic;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, StandardScaler};
use crate::error::{Error, Result};

pub use forest::{train_forest, Forest, ForestParams, LeafPath, Node, Tree};
pub use logistic::{train_logistic, LogisticParams};
pub use svm::{train_linear_svm, SvmParams};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logistic,
    Svm,
}

/// `sign(w·x + b)` for logistic models and `sign(w·scale(x) + b)` for SVMs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub scaler: Option<StandardScaler>,
    pub converged: bool,
}

impl LinearModel {
    /// Decision value on an already-scaled (or unscaled logistic) input.
    pub fn decision_raw(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        match &self.scaler {
            Some(s) => self.decision_raw(&s.apply(x)),
            None => self.decision_raw(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Linear(LinearModel),
    Forest(Forest),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logistic,
    Svm,
    Forest,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::Svm => "svm",
            Self::Forest => "forest",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "lr" => Ok(Self::Logistic),
            "svm" => Ok(Self::Svm),
            "forest" | "rf" => Ok(Self::Forest),
            _ => Err(Error::InvalidParameter(format!("unknown classifier kind `{s}`"))),
        }
    }
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Linear(m) if m.kind == LinearKind::Logistic => ClassifierKind::Logistic,
            Classifier::Linear(_) => ClassifierKind::Svm,
            Classifier::Forest(_) => ClassifierKind::Forest,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.weights.len(),
            Classifier::Forest(f) => f.n_features,
        }
    }

    /// Linear score, or mean leaf probability minus 0.5 for forests.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), got: x.len() });
        }
        Ok(match self {
            Classifier::Linear(m) => m.decision(x),
            Classifier::Forest(f) => f.mean_proba(x) - 0.5,
        })
    }

    /// +1 when the decision value is at least 0.
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(if self.decision_value(x)? >= 0.0 { 1 } else { -1 })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ModelDoc::from(self)).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    kind: ClassifierKind,
    n_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<StandardScaler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<Tree>>,
}

impl From<&Classifier> for ModelDoc {
    fn from(c: &Classifier) -> Self {
        let mut doc = ModelDoc {
            version: MODEL_VERSION,
            kind: c.kind(),
            n_features: c.width(),
            weights: None,
            intercept: None,
            scaler: None,
            converged: None,
            max_depth: None,
            trees: None,
        };
        match c {
            Classifier::Linear(m) => {
                doc.weights = Some(m.weights.clone());
                doc.intercept = Some(m.intercept);
                doc.scaler = m.scaler.clone();
                doc.converged = Some(m.converged);
            }
            Classifier::Forest(f) => {
                doc.max_depth = Some(f.max_depth);
                doc.trees = Some(f.trees.clone());
            }
        }
        doc
    }
}

impl TryFrom<ModelDoc> for Classifier {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.version != MODEL_VERSION {
            return Err(Error::Version { found: doc.version, expected: MODEL_VERSION });
        }
        let width = doc.n_features;
        match doc.kind {
            ClassifierKind::Logistic | ClassifierKind::Svm => {
                let weights = doc.weights.ok_or_else(|| Error::Schema("linear model without weights".into()))?;
                let intercept = doc.intercept.ok_or_else(|| Error::Schema("linear model without intercept".into()))?;
                if weights.len() != width {
                    return Err(Error::WidthMismatch { expected: width, got: weights.len() });
                }
                let kind = if doc.kind == ClassifierKind::Svm { LinearKind::Svm } else { LinearKind::Logistic };
                match (&doc.scaler, kind) {
                    (None, LinearKind::Svm) => return Err(Error::Schema("svm model without scaler".into())),
                    (Some(_), LinearKind::Logistic) => {
                        return Err(Error::Schema("logistic model must not carry a scaler".into()))
                    }
                    (Some(s), _) => {
                        s.check()?;
                        if s.width() != width {
                            return Err(Error::WidthMismatch { expected: width, got: s.width() });
                        }
                    }
                    (None, _) => {}
                }
                Ok(Classifier::Linear(LinearModel {
                    kind,
                    weights,
                    intercept,
                    scaler: doc.scaler,
                    converged: doc.converged.unwrap_or(true),
                }))
            }
            ClassifierKind::Forest => {
                let trees = doc.trees.ok_or_else(|| Error::Schema("forest model without trees".into()))?;
                if trees.is_empty() {
                    return Err(Error::Schema("forest model has no trees".into()));
                }
                let max_depth = doc.max_depth.ok_or_else(|| Error::Schema("forest model without max_depth".into()))?;
                for t in &trees {
                    t.check(width)?;
                    if t.depth() > max_depth {
                        return Err(Error::Schema(format!("tree depth {} exceeds max_depth {max_depth}", t.depth())));
                    }
                }
                Ok(Classifier::Forest(Forest { trees, n_features: width, max_depth }))
            }
        }
    }
}

/// Hyperparameters for [`train`]. Fields that do not apply to the chosen
/// kind are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ClassifierKind,
    pub c: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { kind: ClassifierKind::Logistic, c: 1.0, n_trees: 100, max_depth: 6, seed: 0 }
    }
}

pub fn train(data: &EncodedDataset, cfg: &TrainConfig) -> Result<Classifier> {
    Ok(match cfg.kind {
        ClassifierKind::Logistic => Classifier::Linear(train_logistic(
            &data.rows,
            &data.labels,
            &LogisticParams { c: cfg.c, ..Default::default() },
        )?),
        ClassifierKind::Svm => {
            let scaler = data.fit_numeric_scaler()?;
            let params = SvmParams { c: cfg.c, seed: cfg.seed, ..Default::default() };
            Classifier::Linear(train_linear_svm(&data.rows, &data.labels, scaler, &params)?)
        }
        ClassifierKind::Forest => Classifier::Forest(train_forest(
            &data.rows,
            &data.labels,
            &ForestParams { n_trees: cfg.n_trees, max_depth: cfg.max_depth, seed: cfg.seed },
        )?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores with +1 as the positive class.
pub fn evaluate(model: &Classifier, data: &EncodedDataset) -> Result<Metrics> {
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (x, &y) in data.rows.iter().zip(&data.labels) {
        match (model.predict(x)?, y) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fneg += 1,
            _ => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(Metrics { accuracy: ratio(tp + tn, tp + tn + fp + fneg), precision, recall, f1 })
}
