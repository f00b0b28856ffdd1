use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LinearKind, LinearModel};
use crate::data::StandardScaler;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SvmParams {
    /// Soft-margin penalty.
    pub c: f64,
    pub max_epochs: usize,
    /// Stop when the projected-gradient spread of an epoch drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, max_epochs: 1000, tol: 1e-4, seed: 0 }
    }
}

/// Linear soft-margin SVM (hinge loss) on standardized inputs, trained by dual
/// coordinate descent. The intercept is learned as the weight of a constant
/// feature. `rows` are raw encoded rows; `scaler` is applied first and kept
/// in the model.
pub fn train_linear_svm(
    rows: &[Vec<f64>],
    labels: &[i8],
    scaler: StandardScaler,
    params: &SvmParams,
) -> Result<LinearModel> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("SVM training needs at least one row".into()));
    }
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    let d = scaler.width();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::WidthMismatch { expected: d, got: r.len() });
    }
    let z: Vec<Vec<f64>> = rows.iter().map(|r| scaler.apply(r)).collect();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let qd: Vec<f64> = z.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let n = z.len();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut converged = false;
    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let m: f64 = z[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let g = y[i] * m - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == params.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, params.c);
                let step = (alpha[i] - old) * y[i];
                for (wj, zj) in w.iter_mut().zip(&z[i]) {
                    *wj += step * zj;
                }
                b += step;
            }
        }
        if pg_max - pg_min < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("SVM training stopped after {} epochs without meeting tolerance", params.max_epochs);
    }
    Ok(LinearModel { kind: LinearKind::Svm, weights: w, intercept: b, scaler: Some(scaler), converged })
}
