use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column standardization. Columns outside `scaled_cols` keep mean 0 and
/// std 1, so `apply` is the identity there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub scaled_cols: Vec<usize>,
}

/// Fits means and population standard deviations on `scaled_cols`.
pub fn fit_scaler(rows: &[Vec<f64>], width: usize, scaled_cols: &[usize]) -> Result<StandardScaler> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("cannot fit a scaler on zero rows".into()));
    }
    let mut means = vec![0.0; width];
    let mut stds = vec![1.0; width];
    let mut cols = scaled_cols.to_vec();
    cols.sort_unstable();
    cols.dedup();
    let n = rows.len() as f64;
    for &d in &cols {
        if d >= width {
            return Err(Error::WidthMismatch { expected: width, got: d + 1 });
        }
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateColumn { column: d, name: format!("x{d}") });
        }
        means[d] = mean;
        stds[d] = sd;
    }
    Ok(StandardScaler { means, stds, scaled_cols: cols })
}

impl StandardScaler {
    pub fn identity(width: usize) -> Self {
        Self { means: vec![0.0; width], stds: vec![1.0; width], scaled_cols: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.means.iter().zip(&self.stds)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.means.iter().zip(&self.stds)).map(|(v, (m, s))| v * s + m).collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.stds.len() != self.means.len() {
            return Err(Error::Schema("scaler means and stds differ in length".into()));
        }
        for (d, (&m, &s)) in self.means.iter().zip(&self.stds).enumerate() {
            let inside = self.scaled_cols.contains(&d);
            if !(s > 0.0) || !s.is_finite() || !m.is_finite() {
                return Err(Error::Schema(format!("scaler column {d} has invalid parameters")));
            }
            if !inside && (m != 0.0 || s != 1.0) {
                return Err(Error::Schema(format!("unscaled column {d} must store mean 0, std 1")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v, 7.0]).collect()
    }

    #[test]
    fn centered_value_maps_to_zero() {
        let s = fit_scaler(&col(&[2.0, 4.0, 6.0]), 2, &[0]).unwrap();
        assert_eq!(s.apply(&[4.0, 7.0])[0], 0.0);
    }

    #[test]
    fn population_std_by_hand() {
        // mean 4, squared deviations 4 + 0 + 4 over n = 3
        let sigma = (8.0_f64 / 3.0).sqrt();
        let s = fit_scaler(&col(&[2.0, 4.0, 6.0]), 2, &[0]).unwrap();
        assert!((s.stds[0] - sigma).abs() < 1e-15);
        assert!((s.apply(&[6.0, 0.0])[0] - 2.0 / sigma).abs() < 1e-15);
    }

    #[test]
    fn identity_outside_scaled_set() {
        let s = fit_scaler(&col(&[2.0, 4.0, 6.0]), 2, &[0]).unwrap();
        assert_eq!(s.apply(&[4.0, 7.0])[1], 7.0);
        assert_eq!((s.means[1], s.stds[1]), (0.0, 1.0));
    }

    #[test]
    fn constant_scaled_column_is_rejected() {
        match fit_scaler(&col(&[1.0, 2.0]), 2, &[1]) {
            Err(Error::DegenerateColumn { column, .. }) => assert_eq!(column, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invert_round_trips() {
        let s = fit_scaler(&col(&[1.0, 5.0, 12.0]), 2, &[0]).unwrap();
        let x = [3.25, -2.0];
        let back = s.invert(&s.apply(&x));
        assert!((back[0] - x[0]).abs() < 1e-12 && back[1] == x[1]);
    }
}
