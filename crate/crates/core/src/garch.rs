//! Univariate ARMA(ar, ma) - GARCH(p, q) with Gaussian innovations, fitted
//! by maximum likelihood.
//!
//! Parameter vectors are laid out as
//! `[μ, φ_1..φ_ar, θ_1..θ_ma, ω, α_1..α_p, β_1..β_q]`.
//!
//! Recursions start from fixed pre-sample values: lagged returns equal the
//! sample mean, lagged innovations in the mean equation are zero, and lagged
//! squared innovations and variances in the variance equation equal the
//! sample variance.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{minimize_with, normal_sf, numerical_hessian, BoundBox, MinimizeOptions, PENALTY};
use crate::series::{ReturnSeries, TradingDate};

/// Returns are multiplied by this before fitting.
pub const PERCENT_SCALE: f64 = 100.0;
/// Upper limit on Σα + Σβ.
pub const MAX_PERSISTENCE: f64 = 1.0 - 1e-4;
pub const MIN_OBSERVATIONS: usize = 50;
pub const BURN_IN: usize = 500;
const MAX_ORDER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarchSpec {
    pub ar: usize,
    pub ma: usize,
    pub p: usize,
    pub q: usize,
}

impl Default for GarchSpec {
    fn default() -> Self {
        GarchSpec { ar: 1, ma: 1, p: 1, q: 1 }
    }
}

impl GarchSpec {
    pub fn new(ar: usize, ma: usize, p: usize, q: usize) -> Result<Self> {
        let spec = GarchSpec { ar, ma, p, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.q < 1 {
            return Err(Error::Domain(format!(
                "GARCH orders must be at least (1,1), got ({}, {})",
                self.p, self.q
            )));
        }
        if self.ar > MAX_ORDER || self.ma > MAX_ORDER || self.p > MAX_ORDER || self.q > MAX_ORDER {
            return Err(Error::Domain(format!("model orders are capped at {MAX_ORDER}")));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        1 + self.ar + self.ma + 1 + self.p + self.q
    }

    fn omega_index(&self) -> usize {
        1 + self.ar + self.ma
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["mu".to_string()];
        names.extend((1..=self.ar).map(|i| format!("ar{i}")));
        names.extend((1..=self.ma).map(|i| format!("ma{i}")));
        names.push("omega".into());
        names.extend((1..=self.p).map(|i| format!("alpha{i}")));
        names.extend((1..=self.q).map(|i| format!("beta{i}")));
        names
    }

    /// Smallest sample the likelihood is evaluated on.
    pub fn min_length(&self) -> usize {
        (10 * (self.ar + self.ma + self.p + self.q + 2)).max(MIN_OBSERVATIONS)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GarchParams {
    pub mu: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GarchParams {
    pub fn from_slice(spec: &GarchSpec, v: &[f64]) -> Result<Self> {
        if v.len() != spec.n_params() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                spec.n_params(),
                v.len()
            )));
        }
        let mut it = v.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let mu = take(1)[0];
        let ar = take(spec.ar);
        let ma = take(spec.ma);
        let omega = take(1)[0];
        let alpha = take(spec.p);
        let beta = take(spec.q);
        Ok(GarchParams { mu, ar, ma, omega, alpha, beta })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mu];
        v.extend(&self.ar);
        v.extend(&self.ma);
        v.push(self.omega);
        v.extend(&self.alpha);
        v.extend(&self.beta);
        v
    }

    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    /// ω > 0, α, β ≥ 0 and Σα + Σβ ≤ 1 - 1e-4.
    pub fn check_variance_invariants(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::Domain(format!("omega must be positive, got {}", self.omega)));
        }
        if self.alpha.iter().chain(&self.beta).any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("alpha and beta must be non-negative".into()));
        }
        if self.persistence() > MAX_PERSISTENCE {
            return Err(Error::Domain(format!(
                "persistence {} exceeds {MAX_PERSISTENCE}",
                self.persistence()
            )));
        }
        Ok(())
    }
}

/// Innovations and conditional variances from a parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub innovations: Vec<f64>,
    pub variances: Vec<f64>,
}

fn sample_moments(r: &[f64]) -> (f64, f64) {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Runs the ARMA mean and GARCH variance recursions. Fails if any
/// conditional variance is non-positive or non-finite.
pub fn filter(params: &[f64], returns: &[f64], spec: &GarchSpec) -> Result<Filtered> {
    let p = GarchParams::from_slice(spec, params)?;
    let n = returns.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty return vector".into()));
    }
    let (rbar, s2) = sample_moments(returns);
    let mut e = vec![0.0; n];
    let mut h = vec![0.0; n];
    for t in 0..n {
        let mut m = p.mu;
        for (i, phi) in p.ar.iter().enumerate() {
            m += phi * if t > i { returns[t - i - 1] } else { rbar };
        }
        for (j, theta) in p.ma.iter().enumerate() {
            if t > j {
                m += theta * e[t - j - 1];
            }
        }
        e[t] = returns[t] - m;

        let mut v = p.omega;
        for (i, a) in p.alpha.iter().enumerate() {
            v += a * if t > i { e[t - i - 1] * e[t - i - 1] } else { s2 };
        }
        for (j, b) in p.beta.iter().enumerate() {
            v += b * if t > j { h[t - j - 1] } else { s2 };
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NumericalDegeneracy(format!(
                "conditional variance {v} at t={t}"
            )));
        }
        h[t] = v;
    }
    Ok(Filtered { innovations: e, variances: h })
}

/// Gaussian log-likelihood. Returns `-PENALTY` when the recursion produces a
/// non-positive or non-finite variance.
pub fn garch_loglik(params: &[f64], returns: &[f64], spec: &GarchSpec) -> f64 {
    match filter(params, returns, spec) {
        Ok(f) => {
            let ln2pi = (2.0 * PI).ln();
            let ll: f64 = f
                .innovations
                .iter()
                .zip(&f.variances)
                .map(|(e, h)| -0.5 * (ln2pi + h.ln() + e * e / h))
                .sum();
            if ll.is_finite() {
                ll
            } else {
                -PENALTY
            }
        }
        Err(_) => -PENALTY,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GarchFit {
    pub spec: GarchSpec,
    pub params: GarchParams,
    pub param_names: Vec<String>,
    /// Multiplier applied to the returns before fitting.
    pub scale: f64,
    #[serde(skip)]
    pub dates: Vec<TradingDate>,
    #[serde(skip)]
    pub conditional_variances: Vec<f64>,
    #[serde(skip)]
    pub standardized_residuals: Vec<f64>,
    pub loglik: f64,
    pub start_loglik: f64,
    pub std_errors: Option<Vec<f64>>,
    pub t_stats: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
    pub iterations: usize,
    pub evaluations: usize,
}

impl GarchFit {
    /// Mean and sample variance of the standardized residuals.
    pub fn residual_moments(&self) -> (f64, f64) {
        let z = &self.standardized_residuals;
        let n = z.len() as f64;
        let m = z.iter().sum::<f64>() / n;
        let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    /// |mean| < 0.1 and variance within [0.8, 1.2].
    pub fn residuals_in_band(&self) -> bool {
        let (m, v) = self.residual_moments();
        m.abs() < 0.1 && (0.8..=1.2).contains(&v)
    }
}

#[derive(Clone, Debug)]
pub struct GarchFitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for GarchFitOptions {
    fn default() -> Self {
        GarchFitOptions {
            tol: 1e-9,
            max_iter: 50_000,
            restarts: 2,
        }
    }
}

/// Fits on percent returns (×100) and keeps the series dates.
pub fn fit_garch_returns(series: &ReturnSeries, spec: &GarchSpec) -> Result<GarchFit> {
    let values: Vec<f64> = series.values().iter().map(|r| r * PERCENT_SCALE).collect();
    let mut fit = fit_garch(&values, spec).map_err(|e| e.context(format!("GARCH fit for {}", series.asset_id())))?;
    fit.scale = PERCENT_SCALE;
    fit.dates = series.dates();
    Ok(fit)
}

pub fn fit_garch(returns: &[f64], spec: &GarchSpec) -> Result<GarchFit> {
    fit_garch_with(returns, spec, &GarchFitOptions::default())
}

/// Maximum likelihood fit on the values as given.
pub fn fit_garch_with(returns: &[f64], spec: &GarchSpec, opts: &GarchFitOptions) -> Result<GarchFit> {
    spec.validate()?;
    if returns.len() < spec.min_length() {
        return Err(Error::InsufficientData(format!(
            "GARCH fit needs at least {} observations, got {}",
            spec.min_length(),
            returns.len()
        )));
    }
    if returns.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite return".into()));
    }
    let (rbar, var) = sample_moments(returns);
    if !(var > 0.0) {
        return Err(Error::Degenerate("return series has zero variance".into()));
    }
    let sd = var.sqrt();

    let k = spec.n_params();
    let oi = spec.omega_index();
    // optimizer works on params / scale so that ω and μ are O(1) at any return scale
    let mut scale = vec![1.0; k];
    scale[0] = sd;
    scale[oi] = var;

    let mut start = vec![0.0; k];
    start[0] = rbar;
    for v in &mut start[1..oi] {
        *v = 0.05;
    }
    start[oi] = 0.1 * var;
    for v in &mut start[oi + 1..oi + 1 + spec.p] {
        *v = 0.05 / spec.p as f64;
    }
    for v in &mut start[oi + 1 + spec.p..] {
        *v = 0.85 / spec.q as f64;
    }

    let mut bounds = Vec::with_capacity(k);
    bounds.push(((rbar - 5.0 * sd) / sd, (rbar + 5.0 * sd) / sd));
    bounds.extend(std::iter::repeat_n((-0.999, 0.999), spec.ar + spec.ma));
    bounds.push((1e-8, 10.0));
    bounds.extend(std::iter::repeat_n((0.0, 1.0), spec.p + spec.q));
    let bounds = BoundBox::new(bounds)?;

    let n = returns.len() as f64;
    let to_natural = |x: &[f64]| -> Vec<f64> { x.iter().zip(&scale).map(|(v, s)| v * s).collect() };
    let objective = |x: &[f64]| -> f64 {
        let theta = to_natural(x);
        let persistence: f64 = theta[oi + 1..].iter().sum();
        if persistence > MAX_PERSISTENCE {
            return PENALTY;
        }
        -garch_loglik(&theta, returns, spec) / n
    };

    let start_internal: Vec<f64> = start.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let start_loglik = garch_loglik(&start, returns, spec);
    let result = minimize_with(
        objective,
        &start_internal,
        &bounds,
        &MinimizeOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            initial_step: None,
            restarts: opts.restarts,
        },
    )?;
    let theta = to_natural(&result.argmin);
    if !result.converged {
        return Err(Error::NonConvergence {
            best: theta,
            objective: result.value,
            iterations: result.iterations,
        });
    }

    let filtered = filter(&theta, returns, spec)?;
    let loglik = garch_loglik(&theta, returns, spec);
    let standardized = filtered
        .innovations
        .iter()
        .zip(&filtered.variances)
        .map(|(e, h)| e / h.sqrt())
        .collect();

    let std_errors = hessian_std_errors(&result.argmin, &scale, returns, spec);
    let (t_stats, p_values) = match &std_errors {
        Some(se) => {
            let t: Vec<f64> = theta.iter().zip(se).map(|(v, s)| v / s).collect();
            let p = t.iter().map(|t| 2.0 * normal_sf(t.abs())).collect();
            (Some(t), Some(p))
        }
        None => (None, None),
    };

    Ok(GarchFit {
        spec: *spec,
        params: GarchParams::from_slice(spec, &theta)?,
        param_names: spec.param_names(),
        scale: 1.0,
        dates: Vec::new(),
        conditional_variances: filtered.variances,
        standardized_residuals: standardized,
        loglik,
        start_loglik,
        std_errors,
        t_stats,
        p_values,
        iterations: result.iterations,
        evaluations: result.evaluations,
    })
}

/// Standard errors from the inverse Hessian of the negative log-likelihood,
/// or `None` when the Hessian is not positive definite.
fn hessian_std_errors(x: &[f64], scale: &[f64], returns: &[f64], spec: &GarchSpec) -> Option<Vec<f64>> {
    let k = x.len();
    let negll = |xi: &[f64]| -> f64 {
        let theta: Vec<f64> = xi.iter().zip(scale).map(|(v, s)| v * s).collect();
        match filter(&theta, returns, spec) {
            Ok(_) => -garch_loglik(&theta, returns, spec),
            Err(_) => f64::NAN,
        }
    };
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let h = numerical_hessian(negll, x, &steps);
    let hm = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    if hm.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = hm.cholesky()?;
    let cov = chol.inverse();
    let se: Vec<f64> = (0..k)
        .map(|i| cov[(i, i)].sqrt() * scale[i])
        .collect();
    se.iter().all(|v| v.is_finite() && *v > 0.0).then_some(se)
}

/// Simulates `n` returns from the model after a 500-draw burn-in.
pub fn simulate_garch(spec: &GarchSpec, params: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if params.to_vec().len() != spec.n_params()
        || params.ar.len() != spec.ar
        || params.ma.len() != spec.ma
        || params.alpha.len() != spec.p
        || params.beta.len() != spec.q
    {
        return Err(Error::Domain("parameter orders do not match spec".into()));
    }
    params.check_variance_invariants()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + BURN_IN;
    let uncond_h = params.omega / (1.0 - params.persistence());
    let phi_sum: f64 = params.ar.iter().sum();
    let uncond_r = if phi_sum.abs() < 1.0 {
        params.mu / (1.0 - phi_sum)
    } else {
        params.mu
    };
    let mut r = Vec::with_capacity(total);
    let mut e: Vec<f64> = Vec::with_capacity(total);
    let mut h: Vec<f64> = Vec::with_capacity(total);
    for t in 0..total {
        let mut v = params.omega;
        for (i, a) in params.alpha.iter().enumerate() {
            v += a * if t > i { e[t - i - 1].powi(2) } else { uncond_h };
        }
        for (j, b) in params.beta.iter().enumerate() {
            v += b * if t > j { h[t - j - 1] } else { uncond_h };
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let et = v.sqrt() * z;
        let mut m = params.mu;
        for (i, phi) in params.ar.iter().enumerate() {
            m += phi * if t > i { r[t - i - 1] } else { uncond_r };
        }
        for (j, theta) in params.ma.iter().enumerate() {
            if t > j {
                m += theta * e[t - j - 1];
            }
        }
        h.push(v);
        e.push(et);
        r.push(m + et);
    }
    Ok(r.split_off(BURN_IN))
}
