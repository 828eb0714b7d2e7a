//! DCC(1,1) dynamic conditional correlation on standardized residuals.
//!
//! Q_t = (1 - a - b) Q̄ + a ε_{t-1} ε_{t-1}ᵀ + b Q_{t-1}, with Q_1 = Q̄ and
//! R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}. Q̄ is the sample covariance
//! of the residuals (correlation targeting).

use indexmap::IndexMap;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::garch::{fit_garch_returns, GarchFit, GarchSpec, MAX_PERSISTENCE};
use crate::numerics::{minimize_with, BoundBox, MinimizeOptions, PENALTY};
use crate::series::{ReturnPanel, TradingDate};

pub const DEFAULT_SMOOTHING_HALFWIDTH: usize = 5;
/// Smallest eigenvalue an R_t may have.
pub const PSD_TOLERANCE: f64 = -1e-8;
const SINGULAR_EIGENVALUE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DccPath {
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DccFit {
    pub asset_ids: Vec<String>,
    pub a: f64,
    pub b: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub q_bar: DMatrix<f64>,
    /// Correlation-stage log-likelihood; `None` for a degenerate system.
    pub loglik: Option<f64>,
    pub loglik_static: Option<f64>,
    pub iterations: usize,
    /// Set when the residual correlation matrix is singular and the static
    /// model was used in place of an estimate.
    pub degenerate: bool,
    #[serde(skip)]
    pub path: DccPath,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    serde::Serialize::serialize(&rows, s)
}

impl DccFit {
    /// ρ_t between columns `i` and `j`.
    pub fn pair_correlation(&self, i: usize, j: usize) -> Vec<f64> {
        self.path.r.iter().map(|r| r[(i, j)]).collect()
    }

    pub fn column_index(&self, asset_id: &str) -> Result<usize> {
        self.asset_ids
            .iter()
            .position(|a| a == asset_id)
            .ok_or_else(|| Error::Lookup(format!("asset {asset_id} not in DCC system")))
    }
}

/// Sample covariance of the columns of `eps` with a 1/T denominator.
pub fn sample_covariance(eps: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, m) = eps.shape();
    let means: Vec<f64> = (0..m).map(|j| eps.column(j).sum() / t as f64).collect();
    DMatrix::from_fn(m, m, |i, j| {
        (0..t).map(|s| (eps[(s, i)] - means[i]) * (eps[(s, j)] - means[j])).sum::<f64>() / t as f64
    })
}

/// Rescales a positive-diagonal matrix to unit diagonal.
pub fn to_correlation(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = q.nrows();
    let d: Vec<f64> = (0..m).map(|i| q[(i, i)]).collect();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::NumericalDegeneracy(format!("Q diagonal entry {i} is {}", d[i])));
    }
    let s: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            (q[(i, j)] / (s[i] * s[j])).clamp(-1.0, 1.0)
        }
    }))
}

/// Unit diagonal within 1e-10, symmetric, entries in [-1, 1] and
/// eigenvalues ≥ -1e-8.
pub fn check_correlation_matrix(r: &DMatrix<f64>) -> Result<()> {
    let m = r.nrows();
    for i in 0..m {
        if (r[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(Error::NumericalDegeneracy(format!("diagonal entry {i} is {}", r[(i, i)])));
        }
        for j in 0..m {
            if r[(i, j)] != r[(j, i)] || r[(i, j)].abs() > 1.0 {
                return Err(Error::NumericalDegeneracy(format!("entry ({i},{j}) is {}", r[(i, j)])));
            }
        }
    }
    let min_eig = SymmetricEigen::new(r.clone()).eigenvalues.min();
    if min_eig < PSD_TOLERANCE {
        return Err(Error::NumericalDegeneracy(format!("smallest eigenvalue {min_eig}")));
    }
    Ok(())
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0 && a + b <= MAX_PERSISTENCE) {
        return Err(Error::Domain(format!("infeasible DCC parameters a={a}, b={b}")));
    }
    Ok(())
}

/// Steps the Q recursion, handing each Q_t to `visit` together with its
/// row index.
fn run_recursion<F>(eps: &DMatrix<f64>, a: f64, b: f64, q_bar: &DMatrix<f64>, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &DMatrix<f64>) -> Result<()>,
{
    let t_len = eps.nrows();
    let mut q = q_bar.clone();
    let base = q_bar * (1.0 - a - b);
    for t in 0..t_len {
        if t > 0 {
            let e = eps.row(t - 1).transpose();
            q = &base + (&e * e.transpose()) * a + &q * b;
        }
        visit(t, &q)?;
    }
    Ok(())
}

pub fn dcc_recursion(eps: &DMatrix<f64>, a: f64, b: f64, q_bar: &DMatrix<f64>) -> Result<DccPath> {
    check_ab(a, b)?;
    let (t_len, m) = eps.shape();
    if t_len < 2 {
        return Err(Error::InsufficientData(format!("DCC needs T ≥ 2, got {t_len}")));
    }
    if q_bar.shape() != (m, m) {
        return Err(Error::InvalidInput(format!("Q̄ must be {m}x{m}")));
    }
    let mut path = DccPath {
        q: Vec::with_capacity(t_len),
        r: Vec::with_capacity(t_len),
    };
    run_recursion(eps, a, b, q_bar, |_, q| {
        path.r.push(to_correlation(q)?);
        path.q.push(q.clone());
        Ok(())
    })?;
    Ok(path)
}

/// Σ_t -½(ln|R_t| + ε_tᵀ R_t⁻¹ ε_t - ε_tᵀ ε_t), or `None` if some R_t is
/// not positive definite.
pub fn dcc_loglik(eps: &DMatrix<f64>, a: f64, b: f64, q_bar: &DMatrix<f64>) -> Option<f64> {
    let mut ll = 0.0;
    let ok = run_recursion(eps, a, b, q_bar, |t, q| {
        let r = to_correlation(q)?;
        let chol = r
            .cholesky()
            .ok_or_else(|| Error::NumericalDegeneracy("R_t not positive definite".into()))?;
        let e = eps.row(t).transpose();
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let z = chol.l().solve_lower_triangular(&e).expect("cholesky factor is invertible");
        ll += -0.5 * (log_det + z.norm_squared() - e.norm_squared());
        Ok(())
    });
    match ok {
        Ok(()) if ll.is_finite() => Some(ll),
        _ => None,
    }
}

pub fn fit_dcc(eps: &DMatrix<f64>, asset_ids: &[String]) -> Result<DccFit> {
    let (t_len, m) = eps.shape();
    if asset_ids.len() != m {
        return Err(Error::InvalidInput(format!("{} asset ids for {m} columns", asset_ids.len())));
    }
    if m < 2 {
        return Err(Error::InvalidInput("DCC needs at least two series".into()));
    }
    if t_len < 10 {
        return Err(Error::InsufficientData(format!("DCC needs at least 10 dates, got {t_len}")));
    }
    if eps.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite standardized residual".into()));
    }
    let q_bar = sample_covariance(eps);
    let static_r = to_correlation(&q_bar)?;
    let min_eig = SymmetricEigen::new(static_r.clone()).eigenvalues.min();
    if min_eig < SINGULAR_EIGENVALUE {
        log::warn!("residual correlation matrix is singular (min eigenvalue {min_eig:.3e}); using the static model");
        let path = dcc_recursion(eps, 0.0, 0.0, &q_bar)?;
        return Ok(DccFit {
            asset_ids: asset_ids.to_vec(),
            a: 0.0,
            b: 0.0,
            q_bar,
            loglik: None,
            loglik_static: None,
            iterations: 0,
            degenerate: true,
            path,
        });
    }

    let n = t_len as f64;
    let objective = |x: &[f64]| -> f64 {
        if x[0] + x[1] > MAX_PERSISTENCE {
            return PENALTY;
        }
        match dcc_loglik(eps, x[0], x[1], &q_bar) {
            Some(ll) => -ll / n,
            None => PENALTY,
        }
    };
    let bounds = BoundBox::new(vec![(0.0, 1.0), (0.0, 1.0)])?;
    let result = minimize_with(
        objective,
        &[0.05, 0.90],
        &bounds,
        &MinimizeOptions {
            tol: 1e-9,
            max_iter: 5000,
            initial_step: None,
            restarts: 1,
        },
    )?;
    if !result.converged {
        return Err(Error::NonConvergence {
            best: result.argmin,
            objective: result.value,
            iterations: result.iterations,
        });
    }
    let loglik_static = dcc_loglik(eps, 0.0, 0.0, &q_bar);
    let (mut a, mut b) = (result.argmin[0], result.argmin[1]);
    let mut loglik = dcc_loglik(eps, a, b, &q_bar);
    // the constant-correlation model is nested at (0, 0)
    if let (Some(s), Some(f)) = (loglik_static, loglik) {
        if s > f {
            (a, b, loglik) = (0.0, 0.0, Some(s));
        }
    }
    let path = dcc_recursion(eps, a, b, &q_bar)?;
    Ok(DccFit {
        asset_ids: asset_ids.to_vec(),
        a,
        b,
        q_bar,
        loglik,
        loglik_static,
        iterations: result.iterations,
        degenerate: false,
        path,
    })
}

/// Centered moving average over 2·halfwidth + 1 points; near the ends the
/// window shrinks symmetrically.
pub fn smooth_series(xs: &[f64], halfwidth: usize) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let k = halfwidth.min(i).min(n - 1 - i);
            xs[i - k..=i + k].iter().sum::<f64>() / (2 * k + 1) as f64
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DccSeries {
    pub base_asset_id: String,
    pub other_asset_id: String,
    pub halfwidth: usize,
    pub observations: Vec<(TradingDate, f64)>,
    pub smoothed: Vec<(TradingDate, f64)>,
}

#[derive(Clone, Debug)]
pub struct DccRun {
    pub garch: IndexMap<String, GarchFit>,
    pub fits: Vec<DccFit>,
    pub series: Vec<DccSeries>,
}

#[derive(Clone, Debug)]
pub struct DccOptions {
    pub base_asset_id: String,
    pub smoothing_halfwidth: usize,
    /// Estimate a separate 2x2 system per pair instead of one joint system.
    pub pairwise: bool,
}

/// Fits GARCH per asset, then DCC over the standardized residuals, and
/// extracts each base-asset pair.
pub fn dcc_pipeline(panel: &ReturnPanel, specs: &IndexMap<String, GarchSpec>, opts: &DccOptions) -> Result<DccRun> {
    let ids: Vec<String> = panel.asset_ids().map(str::to_string).collect();
    let fits: Vec<(String, GarchFit)> = ids
        .par_iter()
        .map(|id| {
            let spec = specs.get(id).copied().unwrap_or_default();
            let fit = fit_garch_returns(&panel.series(id)?, &spec)?;
            Ok((id.clone(), fit))
        })
        .collect::<Result<_>>()?;
    let garch: IndexMap<String, GarchFit> = fits.into_iter().collect();
    dcc_from_garch(panel.dates(), &garch, opts).map(|(fits, series)| DccRun { garch, fits, series })
}

/// Second stage only, on already fitted univariate models sharing `dates`.
pub fn dcc_from_garch(
    dates: &[TradingDate],
    garch: &IndexMap<String, GarchFit>,
    opts: &DccOptions,
) -> Result<(Vec<DccFit>, Vec<DccSeries>)> {
    let base = &opts.base_asset_id;
    if !garch.contains_key(base) {
        return Err(Error::Lookup(format!("base asset {base} has no GARCH fit")));
    }
    let resid = |id: &str| garch[id].standardized_residuals.as_slice();
    let build = |ids: &[String]| -> Result<DccFit> {
        let cols: Vec<&[f64]> = ids.iter().map(|id| resid(id)).collect();
        let eps = DMatrix::from_fn(dates.len(), cols.len(), |t, j| cols[j][t]);
        fit_dcc(&eps, ids).map_err(|e| e.context(format!("DCC over {}", ids.join(","))))
    };
    let others: Vec<&String> = garch.keys().filter(|k| *k != base).collect();
    let fits: Vec<DccFit> = if opts.pairwise {
        others
            .par_iter()
            .map(|o| build(&[base.clone(), (*o).clone()]))
            .collect::<Result<_>>()?
    } else {
        vec![build(&garch.keys().cloned().collect::<Vec<_>>())?]
    };

    let mut series = Vec::new();
    for (n, other) in others.iter().enumerate() {
        let fit = if opts.pairwise { &fits[n] } else { &fits[0] };
        let raw = fit.pair_correlation(fit.column_index(base)?, fit.column_index(other)?);
        let smooth = smooth_series(&raw, opts.smoothing_halfwidth);
        series.push(DccSeries {
            base_asset_id: base.clone(),
            other_asset_id: (*other).clone(),
            halfwidth: opts.smoothing_halfwidth,
            observations: dates.iter().copied().zip(raw).collect(),
            smoothed: dates.iter().copied().zip(smooth).collect(),
        });
    }
    Ok((fits, series))
}

/// T x 2 standard normal draws whose correlation at row t is `corr[t]`.
pub fn simulate_bivariate_normal(corr: &[f64], seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(corr.len(), 2);
    for (t, rho) in corr.iter().enumerate() {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        out[(t, 0)] = z1;
        out[(t, 1)] = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
    }
    out
}
