use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Linear model with intercept, fitted by (weighted) least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearErrorModel {
    pub names: Vec<String>,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub intercept_se: f64,
    pub se: Vec<f64>,
    /// Weighted `1 - SSR/SST`; NaN when `y` is constant.
    pub r2: f64,
    pub n: usize,
    pub rank: usize,
}

impl LinearErrorModel {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.beta.len() + 1
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.beta.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Relative eigenvalue size below which a direction counts as null.
const RANK_TOLERANCE: f64 = 1e-11;
/// Ridge added when a full-rank Cholesky factorization still fails.
const RIDGE: f64 = 1e-10;

/// Fits `y ~ 1 + X`. Full-rank designs are solved through the normal
/// equations with one refinement step; rank-deficient ones get the
/// minimal-norm solution and a warning.
pub fn fit_least_squares(
    y: &[f64],
    x: &Matrix,
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<LinearErrorModel> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Arity { expected: n, got: y.len() });
    }
    if names.len() != d {
        return Err(Error::Arity {
            expected: d,
            got: names.len(),
        });
    }
    let p = d + 1;
    if n <= p {
        return Err(Error::TooFewRows {
            context: "least squares".into(),
            needed: p + 1,
            got: n,
        });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Arity { expected: n, got: w.len() });
        }
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("regression weights must be finite and nonnegative"));
        }
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression inputs must be finite"));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);

    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let weighted = DMatrix::from_fn(n, p, |i, j| design[(i, j)] * w(i));
    let gram = weighted.transpose() * &design;
    let yv = DVector::from_column_slice(y);
    let rhs = weighted.transpose() * &yv;

    let eig = gram.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_TOLERANCE * max_eig;
    let rank = eig.eigenvalues.iter().filter(|&&e| e > cutoff).count();

    let (coef, inverse) = if rank == p {
        let chol = gram.clone().cholesky().or_else(|| {
            let ridge = RIDGE * gram.trace();
            (gram.clone() + DMatrix::identity(p, p) * ridge).cholesky()
        });
        match chol {
            Some(chol) => {
                let mut b = chol.solve(&rhs);
                let resid_rhs = &rhs - &gram * &b;
                b += chol.solve(&resid_rhs);
                (b, chol.inverse())
            }
            None => pseudo_solve(&eig, cutoff, &rhs),
        }
    } else {
        log::warn!("design matrix has rank {rank} of {p}; using the minimal-norm solution");
        pseudo_solve(&eig, cutoff, &rhs)
    };

    let fitted = &design * &coef;
    let total_w: f64 = (0..n).map(w).sum();
    let mean_y = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / total_w;
    let ssr: f64 = (0..n).map(|i| w(i) * (y[i] - fitted[i]).powi(2)).sum();
    let sst: f64 = (0..n).map(|i| w(i) * (y[i] - mean_y).powi(2)).sum();
    let sigma2 = ssr / (n - rank) as f64;
    let se: Vec<f64> = (0..p).map(|j| (sigma2 * inverse[(j, j)]).max(0.0).sqrt()).collect();
    Ok(LinearErrorModel {
        names: names.to_vec(),
        intercept: coef[0],
        beta: coef.iter().skip(1).copied().collect(),
        intercept_se: se[0],
        se: se[1..].to_vec(),
        r2: if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN },
        n,
        rank,
    })
}

fn pseudo_solve(
    eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    cutoff: f64,
    rhs: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let inv_vals = eig.eigenvalues.map(|e| if e > cutoff { 1.0 / e } else { 0.0 });
    let v = &eig.eigenvectors;
    let pinv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    (&pinv * rhs, pinv)
}

/// Predicted absolute error per row, clamped below at zero.
pub fn predict_error(model: &LinearErrorModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.beta.len() {
        return Err(Error::Arity {
            expected: model.beta.len(),
            got: x.cols(),
        });
    }
    Ok(x.iter_rows().map(|r| model.predict_row(r).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_linear_fit() {
        let x = Matrix::from_rows(2, [[0.0, 1.0], [1.0, 0.0], [2.0, 5.0], [3.0, 1.0], [4.0, 2.0]]).unwrap();
        let y: Vec<f64> = x.iter_rows().map(|r| 1.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let m = fit_least_squares(&y, &x, None, &names(2)).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-9);
        assert!((m.beta[0] - 2.0).abs() < 1e-9 && (m.beta[1] + 0.5).abs() < 1e-9);
        assert!((m.r2 - 1.0).abs() < 1e-12);
        for (r, t) in x.iter_rows().zip(&y) {
            assert!((m.predict_row(r) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn intercept_only() {
        let x = Matrix::zeros(4, 0);
        let m = fit_least_squares(&[1.0, 2.0, 3.0, 6.0], &x, None, &[]).unwrap();
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gives_minimal_norm() {
        let x = Matrix::from_rows(2, [[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]]).unwrap();
        let y = [2.0, 4.0, 6.0, 8.0];
        let m = fit_least_squares(&y, &x, None, &names(2)).unwrap();
        assert!(m.is_rank_deficient());
        assert!((m.beta[0] - m.beta[1]).abs() < 1e-9);
        assert!((m.beta[0] + m.beta[1] - 2.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
        assert!(m.se.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn weighted_fit_matches_replicated_rows() {
        let x = Matrix::from_rows(1, [[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [0.0, 2.0, 1.0, 5.0];
        let weighted = fit_least_squares(&y, &x, Some(&[1.0, 2.0, 1.0, 1.0]), &names(1)).unwrap();
        let xr = Matrix::from_rows(1, [[0.0], [1.0], [1.0], [2.0], [3.0]]).unwrap();
        let plain = fit_least_squares(&[0.0, 2.0, 2.0, 1.0, 5.0], &xr, None, &names(1)).unwrap();
        assert!((weighted.beta[0] - plain.beta[0]).abs() < 1e-12);
        assert!((weighted.intercept - plain.intercept).abs() < 1e-12);
    }

    #[test]
    fn predictions_clamp_at_zero() {
        let m = LinearErrorModel {
            names: names(1),
            intercept: -0.2,
            beta: vec![0.1],
            intercept_se: 0.0,
            se: vec![0.0],
            r2: 1.0,
            n: 10,
            rank: 2,
        };
        let x = Matrix::from_rows(1, [[0.0], [3.0], [5.0]]).unwrap();
        let p = predict_error(&m, &x).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[2] - p[1] - 0.2).abs() < 1e-15);
        assert!(predict_error(&m, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn planted_coefficients_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (2000, 4);
        let beta = [0.5, -1.0, 0.0, 2.0];
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.3 + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5))
            .collect();
        let x = Matrix::from_rows(d, &rows).unwrap();
        let m = fit_least_squares(&y, &x, None, &names(d)).unwrap();
        for j in 0..d {
            assert!((m.beta[j] - beta[j]).abs() < 4.0 * m.se[j]);
        }
    }
}
