//! Ordinary least squares via Householder QR.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest accepted ratio of |R_ii| values before a design is treated as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub n: usize,
    pub k: usize,
    pub intercept: bool,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
}

impl OlsFit {
    pub fn fitted(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.residuals).map(|(y, e)| y - e).collect()
    }

    /// Residual variance estimate rss / (n - k).
    pub fn sigma2(&self) -> f64 {
        self.rss / (self.n - self.k) as f64
    }

    /// Gaussian AIC up to a constant shared by fits on the same sample.
    pub fn aic(&self) -> f64 {
        let n = self.n as f64;
        n * (self.rss / n).ln() + 2.0 * self.k as f64
    }
}

/// Builds an n x k design from columns.
pub fn design_from_columns(columns: &[&[f64]]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i])
}

/// Prepends an intercept column of ones.
pub fn with_intercept(columns: &[&[f64]]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    let ones = vec![1.0; n];
    let mut all: Vec<&[f64]> = vec![&ones];
    all.extend_from_slice(columns);
    design_from_columns(&all)
}

/// Intercept-only design of n rows.
pub fn constant_design(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

/// Least squares fit of `y` on the columns of `x`. `intercept` records
/// whether the caller put a constant in the first column.
pub fn ols(y: &[f64], x: &DMatrix<f64>, intercept: bool) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("design has no columns".into()));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "OLS needs n > k, got n={n}, k={k}"
        )));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in regression data".into()));
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0_f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min / max < RANK_TOLERANCE {
        return Err(Error::SingularDesign {
            fit: "ols".into(),
            detail: format!("R diagonal ratio {:.3e} below {RANK_TOLERANCE:e}", min / max),
        });
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign {
            fit: "ols".into(),
            detail: "triangular solve failed".into(),
        })?;
    let resid = &yv - x * &beta;
    let rss = resid.norm_squared();

    // (X'X)^-1 = R^-1 R^-T
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::SingularDesign {
            fit: "ols".into(),
            detail: "R not invertible".into(),
        })?;
    let s2 = rss / (n - k) as f64;
    let std_errors: Vec<f64> = (0..k)
        .map(|i| (s2 * r_inv.row(i).norm_squared()).sqrt())
        .collect();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let t_stats = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if *se > 0.0 { b / se } else { f64::INFINITY.copysign(*b) })
        .collect();

    Ok(OlsFit {
        coefficients,
        residuals: resid.iter().copied().collect(),
        rss,
        n,
        k,
        intercept,
        std_errors,
        t_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Normal equations solved by Gauss-Jordan elimination.
    fn normal_equations(y: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
        let (n, k) = x.shape();
        let mut a = vec![vec![0.0; k + 1]; k];
        for i in 0..k {
            for j in 0..k {
                a[i][j] = (0..n).map(|r| x[(r, i)] * x[(r, j)]).sum();
            }
            a[i][k] = (0..n).map(|r| x[(r, i)] * y[r]).sum();
        }
        for c in 0..k {
            let p = (c..k).max_by(|&p, &q| a[p][c].abs().total_cmp(&a[q][c].abs())).unwrap();
            a.swap(c, p);
            let piv = a[c][c];
            for v in a[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..k {
                if r != c {
                    let f = a[r][c];
                    let row_c = a[c].clone();
                    for (v, w) in a[r].iter_mut().zip(row_c) {
                        *v -= f * w;
                    }
                }
            }
        }
        a.iter().map(|row| row[k]).collect()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit = ols(&y, &with_intercept(&[&x]), true).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn mean_model() {
        let y = vec![4.5; 8];
        let fit = ols(&y, &constant_design(8), true).unwrap();
        assert!((fit.coefficients[0] - 4.5).abs() < 1e-14);
        assert!(fit.rss < 1e-25);
    }

    #[test]
    fn random_problem_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.4 - 1.3 * v + rng.random_range(-0.5..0.5)).collect();
        let design = with_intercept(&[&x]);
        let fit = ols(&y, &design, true).unwrap();
        let oracle = normal_equations(&y, &design);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8);
        }
        // residuals orthogonal to every column
        for j in 0..2 {
            let dot: f64 = (0..50).map(|i| design[(i, j)] * fit.residuals[i]).sum();
            assert!(dot.abs() < 1e-8);
        }
        // standard error of the slope from s^2 (X'X)^-1 written out for k=2
        let xbar = x.iter().sum::<f64>() / 50.0;
        let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
        let se_slope = (fit.rss / 48.0 / sxx).sqrt();
        assert!((fit.std_errors[1] - se_slope).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_singular() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let design = with_intercept(&[&x, &x]);
        assert!(matches!(ols(&y, &design, true), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn too_few_rows() {
        let design = with_intercept(&[&[1.0, 2.0]]);
        assert!(matches!(ols(&[1.0, 2.0], &design, true), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn rss_row_order_free_and_nested(rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 8..40), rot in 0usize..40) {
            let x1: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let x2: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.2 + 0.5 * r.0).collect();
            let full = ols(&y, &with_intercept(&[&x1, &x2]), true);
            let restricted = ols(&y, &with_intercept(&[&x1]), true);
            if let (Ok(full), Ok(restricted)) = (full, restricted) {
                prop_assert!(full.rss <= restricted.rss + 1e-9 * (1.0 + restricted.rss));
                let r = rot % y.len();
                let rotate = |v: &[f64]| -> Vec<f64> { v[r..].iter().chain(&v[..r]).copied().collect() };
                let again = ols(&rotate(&y), &with_intercept(&[&rotate(&x1), &rotate(&x2)]), true).unwrap();
                prop_assert!((again.rss - full.rss).abs() < 1e-9 * (1.0 + full.rss));
            }
        }
    }
}
