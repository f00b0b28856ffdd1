use std::io::Read;
use std::path::Path;

use super::{DatasetSchema, FeatureKind, RawDataset, RawValue};
use crate::error::{Error, Result};

/// Row counts after missing-value removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub kept: usize,
    pub dropped: usize,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<(RawDataset, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Reads a header-first CSV. Columns are matched to the schema by name, so
/// extra columns are ignored and order does not matter.
pub fn read_csv<R: Read>(reader: R, schema: &DatasetSchema) -> Result<(RawDataset, LoadReport)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let cols: Vec<usize> = schema.features.iter().map(|f| find(&f.name)).collect::<Result<_>>()?;
    let target_col = find(&schema.target)?;

    let is_missing = |s: &str| schema.missing_tokens.iter().any(|t| t == s);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |i: usize| rec.get(i).unwrap_or("").trim();
        let target = cell(target_col);
        if is_missing(target) || cols.iter().any(|&c| is_missing(cell(c))) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(cols.len());
        for (f, &c) in schema.features.iter().zip(&cols) {
            let s = cell(c);
            let v = match f.kind {
                FeatureKind::Categorical => {
                    let k = f.categories.iter().position(|x| x == s).ok_or_else(|| {
                        Error::Schema(format!("line {line}: unknown category `{s}` for feature `{}`", f.name))
                    })?;
                    RawValue::Cat(k)
                }
                FeatureKind::Numeric | FeatureKind::Binary => {
                    let x: f64 = s.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{s}` is not a number (feature `{}`)", f.name),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Parse { line, message: format!("non-finite value in `{}`", f.name) });
                    }
                    if f.kind == FeatureKind::Binary && x != 0.0 && x != 1.0 {
                        return Err(Error::Schema(format!("line {line}: binary feature `{}` has value {s}", f.name)));
                    }
                    RawValue::Num(x)
                }
            };
            row.push(v);
        }
        rows.push(row);
        labels.push(target.to_string());
    }
    let report = LoadReport { kept: rows.len(), dropped };
    Ok((RawDataset { schema: schema.clone(), rows, labels }, report))
}
