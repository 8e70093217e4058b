//! Ridge regression along a regularization path.
//!
//! The training design is factored once as `X = U diag(s) Vᵀ`; every
//! regularization value and every target column is then solved from that
//! single factorization:
//!
//! ```text
//! W(λ) = V diag(s / (s² + λ)) Uᵀ Y
//! ```
//!
//! All products that touch target columns are evaluated column by column
//! (`tr_mul`), so each output column depends only on its own target column.
//! Splitting targets into blocks, or solving them one at a time, therefore
//! gives bit-identical results.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are dropped.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RidgePath {
    /// n × r
    left: DMatrix<f64>,
    singular_values: DVector<f64>,
    /// r × p, i.e. Vᵀ
    right_t: DMatrix<f64>,
    n_rows: usize,
}

impl RidgePath {
    /// Thin SVD of the design with numerical-rank truncation.
    pub fn factor(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 || p < 1 {
            return Err(Error::Shape(format!(
                "design must have at least 2 rows and 1 column, got {n}x{p}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design contains non-finite values".into()));
        }
        let svd = x.clone().svd(true, true);
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v_t requested");
        let s = svd.singular_values;

        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let s_max = s[order[0]];
        if s_max <= 0.0 {
            return Err(Error::DegenerateDesign);
        }
        let kept: Vec<usize> = order.into_iter().filter(|&i| s[i] >= RANK_TOLERANCE * s_max).collect();
        let r = kept.len();
        let mut left = DMatrix::zeros(n, r);
        let mut right_t = DMatrix::zeros(r, p);
        let mut singular_values = DVector::zeros(r);
        for (k, &i) in kept.iter().enumerate() {
            left.set_column(k, &u.column(i));
            right_t.set_row(k, &vt.row(i));
            singular_values[k] = s[i];
        }
        Ok(RidgePath {
            left,
            singular_values,
            right_t,
            n_rows: n,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.right_t.ncols()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// V (p × r).
    pub fn right_vectors(&self) -> DMatrix<f64> {
        self.right_t.transpose()
    }

    /// U diag(s) Vᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.left.clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * &self.right_t
    }

    /// Uᵀ Y (r × v); the only product that needs the training targets.
    pub fn project(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.nrows() != self.n_rows {
            return Err(Error::Shape(format!(
                "targets have {} rows, design has {}",
                y.nrows(),
                self.n_rows
            )));
        }
        Ok(self.left.tr_mul(y))
    }

    /// s / (s² + λ) per retained singular value.
    pub fn shrinkage(&self, lambda: f64) -> DVector<f64> {
        self.singular_values.map(|s| s / (s * s + lambda))
    }

    /// Weights from a projection `Uᵀ Y` and per-component factors `d`:
    /// `V diag(d) Uᵀ Y`.
    pub fn weights_from_projection(&self, projected: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = projected.clone();
        for (k, dk) in d.iter().enumerate() {
            scaled.row_mut(k).scale_mut(*dk);
        }
        self.right_t.tr_mul(&scaled)
    }

    pub fn solve(&self, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        check_lambda(lambda)?;
        let projected = self.project(y)?;
        Ok(self.weights_from_projection(&projected, &self.shrinkage(lambda)))
    }

    /// Weights for every λ in `grid`, sharing one projection of `y`.
    pub fn solve_path(&self, y: &DMatrix<f64>, grid: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        for &l in grid {
            check_lambda(l)?;
        }
        let projected = self.project(y)?;
        Ok(grid
            .iter()
            .map(|&l| self.weights_from_projection(&projected, &self.shrinkage(l)))
            .collect())
    }

    /// Minimum-norm least squares (λ = 0) over the retained rank.
    pub fn solve_least_squares(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let projected = self.project(y)?;
        let d = self.singular_values.map(|s| 1.0 / s);
        Ok(self.weights_from_projection(&projected, &d))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be positive, got {lambda} (use solve_least_squares for 0)"
        )));
    }
    Ok(())
}

/// `X_new · W`, computed column by column.
pub fn predict(weights: &DMatrix<f64>, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_new.ncols() != weights.nrows() {
        return Err(Error::Shape(format!(
            "design has {} columns, weights have {} rows",
            x_new.ncols(),
            weights.nrows()
        )));
    }
    Ok(x_new.transpose().tr_mul(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Normal-equations oracle: LU solve of (XᵀX + λI) W = XᵀY.
    fn normal_equations(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let p = x.ncols();
        let gram = x.transpose() * x + DMatrix::identity(p, p) * lambda;
        gram.lu().solve(&(x.transpose() * y)).unwrap()
    }

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let path = RidgePath::factor(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(path.rank(), 3);
        for s in path.singular_values().iter() {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_nonzero_column_truncates_to_rank_one() {
        let x = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let path = RidgePath::factor(&x).unwrap();
        assert_eq!(path.rank(), 1);
        assert!((path.singular_values()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_design_reconstructs() {
        let x = randn(50, 20, 1);
        let path = RidgePath::factor(&x).unwrap();
        assert!(rel_frob(&path.reconstruct(), &x) <= 1e-10);
        let s = path.singular_values();
        assert!(s.iter().zip(s.iter().skip(1)).all(|(a, b)| a >= b));
    }

    #[test]
    fn wide_design_factors() {
        let x = randn(12, 40, 2);
        let path = RidgePath::factor(&x).unwrap();
        assert_eq!(path.rank(), 12);
        assert!(rel_frob(&path.reconstruct(), &x) <= 1e-10);
    }

    #[test]
    fn degenerate_and_invalid_designs() {
        assert!(matches!(
            RidgePath::factor(&DMatrix::zeros(5, 3)),
            Err(Error::DegenerateDesign)
        ));
        let mut x = randn(5, 3, 3);
        x[(1, 1)] = f64::NAN;
        assert!(RidgePath::factor(&x).is_err());
        assert!(RidgePath::factor(&randn(1, 3, 4)).is_err());
    }

    #[test]
    fn identity_design_halves_targets_at_unit_penalty() {
        let y = randn(4, 3, 5);
        let path = RidgePath::factor(&DMatrix::identity(4, 4)).unwrap();
        let w = path.solve(&y, 1.0).unwrap();
        assert!(rel_frob(&w, &(&y / 2.0)) < 1e-15);
    }

    #[test]
    fn huge_penalty_shrinks_to_y_over_lambda() {
        let y = randn(4, 3, 6);
        let path = RidgePath::factor(&DMatrix::identity(4, 4)).unwrap();
        let lambda = 1e12;
        let w = path.solve(&y, lambda).unwrap();
        assert!(w.norm() < 1e-10);
        assert!((&w - &y / lambda).amax() < 1e-10 / lambda);
    }

    #[test]
    fn nonpositive_penalty_rejected() {
        let path = RidgePath::factor(&DMatrix::identity(3, 3)).unwrap();
        let y = DMatrix::zeros(3, 1);
        assert!(path.solve(&y, 0.0).is_err());
        assert!(path.solve(&y, -1.0).is_err());
        assert!(path.solve_least_squares(&y).is_ok());
    }

    #[test]
    fn path_matches_normal_equations() {
        let x = randn(50, 20, 7);
        let y = randn(50, 10, 8);
        let path = RidgePath::factor(&x).unwrap();
        let grid = [0.1, 10.0, 1000.0];
        let ws = path.solve_path(&y, &grid).unwrap();
        for (w, &l) in ws.iter().zip(&grid) {
            assert!(rel_frob(w, &normal_equations(&x, &y, l)) <= 1e-8);
        }
    }

    #[test]
    fn zero_weights_predict_zero() {
        let x = randn(6, 4, 9);
        let p = predict(&DMatrix::zeros(4, 3), &x).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
        assert!(predict(&DMatrix::zeros(5, 3), &x).is_err());
    }

    #[test]
    fn least_squares_predictions_are_projections() {
        let x = randn(30, 5, 10);
        let y = randn(30, 2, 11);
        let path = RidgePath::factor(&x).unwrap();
        let w = path.solve_least_squares(&y).unwrap();
        let fitted = predict(&w, &x).unwrap();
        // Hat matrix oracle through QR: Q Qᵀ Y
        let q = x.clone().qr().q();
        let projected = &q * (q.transpose() * &y);
        assert!(rel_frob(&fitted, &projected) < 1e-12);
    }

    #[test]
    fn single_row_prediction_by_hand() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 2.0, 0.5, -3.0, 4.0]);
        let x = DMatrix::from_row_slice(1, 3, &[0.5, 2.0, 1.0]);
        let p = predict(&w, &x).unwrap();
        // 0.5·1 + 2·2 + 1·(−3) = 1.5 ; 0.5·(−1) + 2·0.5 + 1·4 = 4.5
        assert_eq!(p[(0, 0)], 1.5);
        assert_eq!(p[(0, 1)], 4.5);
    }

    #[test]
    fn shrinkage_is_monotone_in_lambda() {
        let x = randn(40, 15, 12);
        let y = randn(40, 4, 13);
        let path = RidgePath::factor(&x).unwrap();
        let grid: Vec<f64> = (0..12).map(|k| 10f64.powf(k as f64 - 3.0)).collect();
        let norms: Vec<f64> = path.solve_path(&y, &grid).unwrap().iter().map(|w| w.norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn near_zero_penalty_residual_is_orthogonal() {
        let x = randn(60, 10, 14);
        let y = randn(60, 3, 15);
        let path = RidgePath::factor(&x).unwrap();
        let lambda = 1e-12 * path.singular_values()[0].powi(2);
        let w = path.solve(&y, lambda).unwrap();
        let resid = &y - predict(&w, &x).unwrap();
        let inner = x.transpose() * &resid;
        for j in 0..x.ncols() {
            for v in 0..y.ncols() {
                let rel = inner[(j, v)].abs() / (x.column(j).norm() * resid.column(v).norm());
                assert!(rel <= 1e-6, "column {j}, target {v}: {rel}");
            }
        }
    }

    #[test]
    fn targets_solve_independently_bit_for_bit() {
        let x = randn(40, 12, 16);
        let y = randn(40, 7, 17);
        let path = RidgePath::factor(&x).unwrap();
        let joint = path.solve(&y, 3.0).unwrap();
        for j in 0..y.ncols() {
            let single = path.solve(&y.columns(j, 1).into_owned(), 3.0).unwrap();
            for i in 0..joint.nrows() {
                assert_eq!(joint[(i, j)].to_bits(), single[(i, 0)].to_bits());
            }
        }
    }
}
