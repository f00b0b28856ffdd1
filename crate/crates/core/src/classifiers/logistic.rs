use nalgebra::{DMatrix, DVector};

use super::{LinearKind, LinearModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LogisticParams {
    /// Inverse regularization strength; the objective is
    /// `½‖w‖² + C Σ log(1 + exp(−y(w·x + b)))` with an unpenalized intercept.
    pub c: f64,
    pub max_iter: usize,
    /// Stop when the gradient's max-norm falls below `tol · max(1, n)`.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { c: 1.0, max_iter: 100, tol: 1e-10 }
    }
}

fn log1pexp(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized logistic regression fitted by damped Newton steps.
pub fn train_logistic(rows: &[Vec<f64>], labels: &[i8], params: &LogisticParams) -> Result<LinearModel> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("logistic regression needs at least one row".into()));
    }
    if !(params.c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    let n = rows.len();
    let d = rows[0].len();
    // augmented design [x, 1]
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { rows[i][j] } else { 1.0 });
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let c = params.c;
    let objective = |theta: &DVector<f64>| -> f64 {
        let m = &x * theta;
        let reg: f64 = theta.rows(0, d).norm_squared() * 0.5;
        reg + c * m.iter().zip(&y).map(|(&mi, &yi)| log1pexp(-yi * mi)).sum::<f64>()
    };

    let mut theta = DVector::<f64>::zeros(d + 1);
    let mut f = objective(&theta);
    let mut converged = false;
    for _ in 0..params.max_iter {
        let m = &x * &theta;
        let mut grad = DVector::<f64>::zeros(d + 1);
        let mut weights = DVector::<f64>::zeros(n);
        for i in 0..n {
            let p = sigmoid(-y[i] * m[i]);
            grad.axpy(-c * y[i] * p, &x.row(i).transpose(), 1.0);
            weights[i] = c * p * (1.0 - p);
        }
        for j in 0..d {
            grad[j] += theta[j];
        }
        if grad.amax() <= params.tol * (n.max(1) as f64) {
            converged = true;
            break;
        }
        let mut hess = x.transpose() * DMatrix::from_diagonal(&weights) * &x;
        for j in 0..d {
            hess[(j, j)] += 1.0;
        }
        hess[(d, d)] += 1e-10;
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta - &step * alpha;
            let fc = objective(&cand);
            if fc <= f - 1e-4 * alpha * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no further decrease is representable
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("logistic regression did not converge in {} iterations", params.max_iter);
    }
    Ok(LinearModel {
        kind: LinearKind::Logistic,
        weights: theta.rows(0, d).iter().copied().collect(),
        intercept: theta[d],
        scaler: None,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_one_dimensional() {
        let m = train_logistic(&[vec![-1.0], vec![1.0]], &[-1, 1], &LogisticParams::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.decision_raw(&[-1.0]) < 0.0 && m.decision_raw(&[1.0]) > 0.0);
        assert!(m.converged);
    }

    #[test]
    fn single_class_predicts_it_everywhere() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = train_logistic(&rows, &[1; 10], &LogisticParams::default()).unwrap();
        for x in [[-100.0, 0.0], [0.0, 0.0], [5.0, 1000.0]] {
            assert!(m.decision_raw(&x) >= 0.0);
        }
    }

    #[test]
    fn stationary_point_of_objective() {
        // gradient of the regularized loss vanishes at the returned weights
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![2.0, -1.0], vec![0.5, 0.2], vec![1.5, 1.5]];
        let labels = [-1, 1, 1, -1, 1];
        let m = train_logistic(&rows, &labels, &LogisticParams::default()).unwrap();
        let mut g = m.weights.clone();
        let mut gb = 0.0;
        for (r, &l) in rows.iter().zip(&labels) {
            let y = f64::from(l);
            let p = 1.0 / (1.0 + (y * m.decision_raw(r)).exp());
            for j in 0..2 {
                g[j] -= y * p * r[j];
            }
            gb -= y * p;
        }
        assert!(g.iter().all(|v| v.abs() < 1e-8) && gb.abs() < 1e-8, "{g:?} {gb}");
    }

    #[test]
    fn rejects_non_positive_c() {
        let p = LogisticParams { c: 0.0, ..Default::default() };
        assert!(train_logistic(&[vec![1.0]], &[1], &p).is_err());
    }
}
