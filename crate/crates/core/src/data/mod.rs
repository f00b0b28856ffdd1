//! Tabular credit data: schema, CSV loading, one-hot encoding, scaling and
//! hold-out splitting.
//!
//! Categorical features are expanded into full one-hot groups (no reference
//! category is dropped) because the action space switches categories by
//! moving the single active column inside a group.

mod loader;
mod scaler;
pub mod synthetic;

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loader::{load_csv, read_csv, LoadReport};
pub use scaler::{fit_scaler, StandardScaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Numeric, categories: Vec::new() }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Binary, categories: Vec::new() }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".into(), "?".into()]
}

/// Column layout of a credit dataset, read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub features: Vec<FeatureSpec>,
    pub target: String,
    /// Raw target value mapped to the accepted class (+1).
    pub positive_label: String,
    /// Cell values treated as missing (after trimming).
    #[serde(default = "default_missing")]
    pub missing_tokens: Vec<String>,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.kind == FeatureKind::Categorical {
                if f.categories.len() < 2 {
                    return Err(Error::Schema(format!("categorical feature `{}` needs at least 2 categories", f.name)));
                }
                let uniq: HashSet<_> = f.categories.iter().collect();
                if uniq.len() != f.categories.len() {
                    return Err(Error::Schema(format!("feature `{}` lists a category twice", f.name)));
                }
            }
        }
        if seen.contains(self.target.as_str()) {
            return Err(Error::Schema(format!("target `{}` is also a feature", self.target)));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Self = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    /// Encoded width: one column per numeric/binary feature plus one per category.
    pub fn encoded_width(&self) -> usize {
        self.features
            .iter()
            .map(|f| if f.kind == FeatureKind::Categorical { f.categories.len() } else { 1 })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawValue {
    Num(f64),
    /// Index into the feature's category list.
    Cat(usize),
}

/// Typed rows as read from disk, before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: DatasetSchema,
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub kind: FeatureKind,
    pub columns: Range<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// Maps original features to contiguous encoded column groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub groups: Vec<FeatureGroup>,
    pub width: usize,
}

impl EncodingMap {
    pub fn from_schema(schema: &DatasetSchema) -> Self {
        let mut groups = Vec::with_capacity(schema.features.len());
        let mut col = 0;
        for f in &schema.features {
            let w = if f.kind == FeatureKind::Categorical { f.categories.len() } else { 1 };
            groups.push(FeatureGroup {
                name: f.name.clone(),
                kind: f.kind,
                columns: col..col + w,
                categories: f.categories.clone(),
            });
            col += w;
        }
        Self { groups, width: col }
    }

    /// Identity encoding of `width` numeric columns named `x0, x1, ...`.
    pub fn all_numeric(width: usize) -> Self {
        let groups = (0..width)
            .map(|d| FeatureGroup {
                name: format!("x{d}"),
                kind: FeatureKind::Numeric,
                columns: d..d + 1,
                categories: Vec::new(),
            })
            .collect();
        Self { groups, width }
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width);
        for g in &self.groups {
            if g.kind == FeatureKind::Categorical {
                out.extend(g.categories.iter().map(|c| format!("{}={}", g.name, c)));
            } else {
                out.push(g.name.clone());
            }
        }
        out
    }

    /// Columns of non-categorical, non-binary features: the set scaled by
    /// the standard scaler.
    pub fn numeric_columns(&self) -> Vec<usize> {
        self.groups.iter().filter(|g| g.kind == FeatureKind::Numeric).map(|g| g.columns.start).collect()
    }

    pub fn encode_row(&self, row: &[RawValue]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (g, v) in self.groups.iter().zip(row) {
            match *v {
                RawValue::Num(x) => out[g.columns.start] = x,
                RawValue::Cat(k) => out[g.columns.start + k] = 1.0,
            }
        }
        out
    }

    /// Inverse of [`encode_row`](Self::encode_row); a categorical group
    /// decodes to its largest column.
    pub fn decode_row(&self, row: &[f64]) -> Vec<RawValue> {
        self.groups
            .iter()
            .map(|g| match g.kind {
                FeatureKind::Categorical => {
                    let cols = &row[g.columns.clone()];
                    let k = cols
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, &v)| if v > cols[best] { i } else { best });
                    RawValue::Cat(k)
                }
                _ => RawValue::Num(row[g.columns.start]),
            })
            .collect()
    }
}

/// Numeric matrix (row-major, one `Vec` per instance) with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    pub map: EncodingMap,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.map.width
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            map: self.map.clone(),
        }
    }

    /// Fits a standard scaler on the numeric (non-binary) columns.
    pub fn fit_numeric_scaler(&self) -> Result<StandardScaler> {
        fit_scaler(&self.rows, self.width(), &self.map.numeric_columns()).map_err(|e| match e {
            Error::DegenerateColumn { column, .. } => {
                Error::DegenerateColumn { column, name: self.map.column_names()[column].clone() }
            }
            other => other,
        })
    }

    /// Writes the encoded matrix with a `label` column for inspection.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let mut header = self.map.column_names();
        header.push("label".into());
        let flush = |r: csv::Result<()>| r.map_err(|e| Error::io(path, e.into()));
        flush(w.write_record(&header))?;
        for (row, &y) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            flush(w.write_record(&rec))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One-hot encodes categoricals and maps labels to ±1.
pub fn encode(raw: &RawDataset) -> EncodedDataset {
    let map = EncodingMap::from_schema(&raw.schema);
    let rows = raw.rows.iter().map(|r| map.encode_row(r)).collect();
    let labels = raw.labels.iter().map(|l| if *l == raw.schema.positive_label { 1 } else { -1 }).collect();
    EncodedDataset { rows, labels, map }
}

/// Seeded shuffle followed by a `floor(ratio * n)` / rest split.
pub fn split(data: &EncodedDataset, ratio: f64, seed: u64) -> Result<(EncodedDataset, EncodedDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = (ratio * data.len() as f64).floor() as usize;
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> DatasetSchema {
        DatasetSchema {
            features: vec![
                FeatureSpec::numeric("a"),
                FeatureSpec::numeric("b"),
                FeatureSpec::categorical("color", ["R", "G", "B"]),
            ],
            target: "y".into(),
            positive_label: "good".into(),
            missing_tokens: default_missing(),
        }
    }

    #[test]
    fn one_hot_of_middle_category() {
        let map = EncodingMap::from_schema(&schema());
        let row = map.encode_row(&[RawValue::Num(1.0), RawValue::Num(2.0), RawValue::Cat(1)]);
        assert_eq!(&row[2..], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn width_counts_categories() {
        assert_eq!(EncodingMap::from_schema(&schema()).width, 5);
        assert_eq!(schema().encoded_width(), 5);
    }

    #[test]
    fn schema_validation() {
        let mut s = schema();
        s.features.push(FeatureSpec::numeric("a"));
        assert!(s.validate().is_err());
        let mut s = schema();
        s.target = "b".into();
        assert!(s.validate().is_err());
        let mut s = schema();
        s.features[2].categories.truncate(1);
        assert!(s.validate().is_err());
        assert!(schema().validate().is_ok());
    }

    #[test]
    fn labels_follow_positive_value() {
        let raw = RawDataset {
            schema: schema(),
            rows: vec![vec![RawValue::Num(0.0), RawValue::Num(0.0), RawValue::Cat(0)]; 2],
            labels: vec!["good".into(), "bad".into()],
        };
        assert_eq!(encode(&raw).labels, vec![1, -1]);
    }

    fn numeric_dataset(n: usize) -> EncodedDataset {
        EncodedDataset {
            rows: (0..n).map(|i| vec![i as f64]).collect(),
            labels: vec![1; n],
            map: EncodingMap::all_numeric(1),
        }
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let (tr, te) = split(&numeric_dataset(100), 0.75, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (75, 25));
        let (tr, te) = split(&numeric_dataset(1), 0.75, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (0, 1));
        assert!(split(&numeric_dataset(3), 1.0, 0).is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let data = numeric_dataset(50);
        let (a1, b1) = split(&data, 0.6, 9).unwrap();
        let (a2, b2) = split(&data, 0.6, 9).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let (a3, _) = split(&data, 0.6, 10).unwrap();
        assert_ne!(a1.rows, a3.rows);
        let mut all: Vec<i64> = a1.rows.iter().chain(&b1.rows).map(|r| r[0] as i64).collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
