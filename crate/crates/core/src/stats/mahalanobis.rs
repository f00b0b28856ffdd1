use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Covariance of the training data together with the upper-triangular factor
/// `U` of its inverse, `Σ⁻¹ = UᵀU`.
#[derive(Debug, Clone)]
pub struct MahalanobisContext {
    sigma: DMatrix<f64>,
    inverse: DMatrix<f64>,
    u: DMatrix<f64>,
    eps: f64,
}

/// Default ridge added to the covariance diagonal: `1e-6 · trace(Σ) / D`.
pub fn default_ridge(sigma: &DMatrix<f64>) -> f64 {
    let d = sigma.nrows().max(1) as f64;
    let tr = sigma.trace();
    if tr > 0.0 {
        1e-6 * tr / d
    } else {
        1e-6
    }
}

/// Population covariance of `rows`.
pub fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let mut centered = x;
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    (centered.transpose() * &centered) / n as f64
}

pub fn build_mahalanobis(rows: &[Vec<f64>], eps: Option<f64>) -> Result<MahalanobisContext> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!("covariance needs at least 2 rows, got {}", rows.len())));
    }
    let mut sigma = covariance(rows);
    let eps = eps.unwrap_or_else(|| default_ridge(&sigma));
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge must be a finite non-negative number, got {eps}")));
    }
    let d = sigma.nrows();
    for i in 0..d {
        sigma[(i, i)] += eps;
    }
    let min_eig = || sigma.clone().symmetric_eigenvalues().min();
    let chol = sigma.clone().cholesky().ok_or_else(|| Error::Factorization { min_eigenvalue: min_eig() })?;
    let inverse = chol.inverse();
    let inv_sym = (&inverse + inverse.transpose()) * 0.5;
    let l = inv_sym.clone().cholesky().ok_or_else(|| Error::Factorization { min_eigenvalue: min_eig() })?.unpack();
    Ok(MahalanobisContext { sigma, inverse: inv_sym, u: l.transpose(), eps })
}

impl MahalanobisContext {
    /// Builds a context directly from an inverse covariance (used by tests and
    /// synthetic benchmarks).
    pub fn from_inverse(inverse: DMatrix<f64>) -> Result<Self> {
        let sigma = inverse
            .clone()
            .try_inverse()
            .ok_or(Error::Factorization { min_eigenvalue: 0.0 })?;
        let l = inverse
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Factorization { min_eigenvalue: inverse.symmetric_eigenvalues().min() })?
            .unpack();
        Ok(Self { sigma, inverse, u: l.transpose(), eps: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Regularized covariance `Σ + εI`.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn ridge(&self) -> f64 {
        self.eps
    }

    /// `U v` as a plain vector.
    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        (&self.u * DVector::from_column_slice(v)).iter().copied().collect()
    }

    /// Exact distance `sqrt((x' − x)ᵀ Σ⁻¹ (x' − x))`.
    pub fn distance(&self, x: &[f64], x2: &[f64]) -> f64 {
        let v = DVector::from_iterator(x.len(), x2.iter().zip(x).map(|(b, a)| b - a));
        v.dot(&(&self.inverse * &v)).max(0.0).sqrt()
    }

    /// `‖U(x' − x)‖₂`, equal to [`distance`](Self::distance) up to rounding.
    pub fn l2_form(&self, x: &[f64], x2: &[f64]) -> f64 {
        let v: Vec<f64> = x2.iter().zip(x).map(|(b, a)| b - a).collect();
        self.transform(&v).iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    /// `‖U(x' − x)‖₁`, the linearizable surrogate used in the MILP cost.
    pub fn l1_surrogate(&self, x: &[f64], x2: &[f64]) -> f64 {
        let v: Vec<f64> = x2.iter().zip(x).map(|(b, a)| b - a).collect();
        self.l1_of(&v)
    }

    pub fn l1_of(&self, displacement: &[f64]) -> f64 {
        self.transform(displacement).iter().map(|t| t.abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    #[test]
    fn independent_unit_columns_give_identity() {
        // four points at (±1, ±1): both columns have population variance 1
        let rows = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let ctx = build_mahalanobis(&rows, None).unwrap();
        assert!(max_abs(&(ctx.u() - DMatrix::identity(2, 2))) <= 1e-6);
    }

    #[test]
    fn diagonal_inverse_has_root_factor() {
        // variances 1/4 and 1/9 give Σ⁻¹ = diag(4, 9)
        let rows = vec![vec![0.5, 1.0 / 3.0], vec![-0.5, -1.0 / 3.0], vec![0.5, -1.0 / 3.0], vec![-0.5, 1.0 / 3.0]];
        let ctx = build_mahalanobis(&rows, Some(0.0)).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!(max_abs(&(ctx.u() - expect)) < 1e-12);
        assert!(max_abs(&(ctx.u().transpose() * ctx.u() - ctx.inverse())) < 1e-8);
    }

    #[test]
    fn constant_column_is_rescued_by_ridge() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, 3.0], vec![4.0, 3.0]];
        assert!(build_mahalanobis(&rows, Some(0.0)).is_err());
        let ctx = build_mahalanobis(&rows, Some(1e-6)).unwrap();
        assert!(ctx.u()[(1, 1)].is_finite());
    }

    #[test]
    fn forms_by_hand() {
        let ctx = MahalanobisContext::from_inverse(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        let (x, x2) = ([0.0, 0.0], [1.0, 1.0]);
        assert!((ctx.l2_form(&x, &x2) - 13f64.sqrt()).abs() < 1e-12);
        assert!((ctx.distance(&x, &x2) - 13f64.sqrt()).abs() < 1e-12);
        assert!((ctx.l1_surrogate(&x, &x2) - 5.0).abs() < 1e-12);
        assert_eq!(ctx.distance(&x2, &x2), 0.0);
    }

    #[test]
    fn random_data_factor_and_norm_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let d = rng.gen_range(1..7);
            let rows: Vec<Vec<f64>> = (0..30)
                .map(|_| {
                    let base: f64 = rng.gen_range(-1.0..1.0);
                    (0..d).map(|j| base * j as f64 + rng.gen_range(-2.0..2.0)).collect()
                })
                .collect();
            let ctx = build_mahalanobis(&rows, None).unwrap();
            let utu = ctx.u().transpose() * ctx.u();
            assert!(max_abs(&(utu - ctx.inverse())) < 1e-8);
            for r in 0..d {
                for c in 0..r {
                    assert_eq!(ctx.u()[(r, c)], 0.0);
                }
            }
            let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (m, l2, l1) = (ctx.distance(&a, &b), ctx.l2_form(&a, &b), ctx.l1_surrogate(&a, &b));
            assert!((m - l2).abs() < 1e-9 * (1.0 + m));
            assert!(l1 >= l2 - 1e-12);
        }
    }
}
