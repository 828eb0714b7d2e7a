//! Augmented Dickey-Fuller unit-root test.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linreg::ols;
use crate::numerics::normal_cdf;

/// Deterministic terms included in the test regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfVariant {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

impl AdfVariant {
    fn deterministic_terms(self) -> usize {
        match self {
            AdfVariant::None => 0,
            AdfVariant::Constant => 1,
            AdfVariant::ConstantTrend => 2,
        }
    }
}

impl fmt::Display for AdfVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdfVariant::None => "none",
            AdfVariant::Constant => "constant",
            AdfVariant::ConstantTrend => "constant+trend",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSelection {
    /// Use exactly this many lagged differences.
    Fixed(usize),
    /// Minimize AIC over 0..=max; `None` means ⌊12·(n/100)^¼⌋.
    Aic(Option<usize>),
}

impl Default for LagSelection {
    fn default() -> Self {
        LagSelection::Aic(None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdfResult {
    pub adf_statistic: f64,
    pub p_value: f64,
    pub lags_used: usize,
    pub max_lags: usize,
    pub n_effective: usize,
    pub variant: AdfVariant,
}

/// Default lag ceiling ⌊12·(n/100)^¼⌋.
pub fn default_max_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Runs the ADF regression
/// `Δy_t = c [+ δt] + γ y_{t-1} + Σ φ_i Δy_{t-i} + e_t` and returns the
/// t-ratio on γ with its MacKinnon p-value.
pub fn adf_test(y: &[f64], variant: AdfVariant, lags: LagSelection) -> Result<AdfResult> {
    let n = y.len();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("ADF input has non-finite values".into()));
    }
    let max_lags = match lags {
        LagSelection::Fixed(p) => p,
        LagSelection::Aic(Some(m)) => m,
        LagSelection::Aic(None) => {
            let cap = (n / 2).saturating_sub(variant.deterministic_terms() + 1);
            default_max_lags(n).min(cap)
        }
    };
    if n < max_lags + 10 {
        return Err(Error::InsufficientData(format!(
            "ADF with {max_lags} lags needs at least {} observations, got {n}",
            max_lags + 10
        )));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::Degenerate("ADF input series is constant".into()));
    }

    let diff: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();

    let lags_used = match lags {
        LagSelection::Fixed(p) => p,
        LagSelection::Aic(_) => {
            // common sample: drop the first max_lags differences for every candidate
            let mut best: Option<(f64, usize)> = None;
            for p in 0..=max_lags {
                let (dy, x) = regression(y, &diff, variant, p, max_lags);
                let fit = ols(&dy, &x, variant != AdfVariant::None)?;
                let aic = fit.aic();
                if best.is_none_or(|(b, _)| aic < b) {
                    best = Some((aic, p));
                }
            }
            best.map(|(_, p)| p).unwrap_or(0)
        }
    };

    let (dy, x) = regression(y, &diff, variant, lags_used, lags_used);
    let fit = ols(&dy, &x, variant != AdfVariant::None).map_err(|e| e.context("ADF regression"))?;
    let level_col = variant.deterministic_terms();
    let stat = fit.t_stats[level_col];

    Ok(AdfResult {
        adf_statistic: stat,
        p_value: mackinnon_p(stat, variant),
        lags_used,
        max_lags,
        n_effective: dy.len(),
        variant,
    })
}

/// Response and design for `lags` lagged differences, with the sample
/// starting after `trim` differences.
fn regression(y: &[f64], diff: &[f64], variant: AdfVariant, lags: usize, trim: usize) -> (Vec<f64>, DMatrix<f64>) {
    let rows: Vec<usize> = (trim..diff.len()).collect();
    let det = variant.deterministic_terms();
    let k = det + 1 + lags;
    let dy: Vec<f64> = rows.iter().map(|&t| diff[t]).collect();
    let x = DMatrix::from_fn(rows.len(), k, |r, c| {
        let t = rows[r];
        match (variant, c) {
            (AdfVariant::Constant | AdfVariant::ConstantTrend, 0) => 1.0,
            (AdfVariant::ConstantTrend, 1) => (r + 1) as f64,
            _ if c == det => y[t],
            _ => diff[t - (c - det)],
        }
    });
    (dy, x)
}

struct Surface {
    max_stat: f64,
    min_stat: f64,
    star_stat: f64,
    small_p: [f64; 3],
    large_p: [f64; 4],
}

// MacKinnon (1994) single-series response surfaces.
const SURFACE_NONE: Surface = Surface {
    max_stat: f64::INFINITY,
    min_stat: -19.04,
    star_stat: -1.04,
    small_p: [0.6344, 1.2378, 0.032496],
    large_p: [0.4797, 0.93557, -0.06999, 0.033066],
};

const SURFACE_CONSTANT: Surface = Surface {
    max_stat: 2.74,
    min_stat: -18.83,
    star_stat: -1.61,
    small_p: [2.1659, 1.4412, 0.038269],
    large_p: [1.7339, 0.93202, -0.12745, -0.010368],
};

const SURFACE_TREND: Surface = Surface {
    max_stat: 0.7,
    min_stat: -16.18,
    star_stat: -2.89,
    small_p: [3.2512, 1.6047, 0.049588],
    large_p: [2.5261, 0.61654, -0.37956, -0.060285],
};

pub const P_FLOOR: f64 = 1e-6;

/// Unclamped asymptotic p-value from the response surface.
pub fn mackinnon_p_raw(stat: f64, variant: AdfVariant) -> f64 {
    let s = match variant {
        AdfVariant::None => &SURFACE_NONE,
        AdfVariant::Constant => &SURFACE_CONSTANT,
        AdfVariant::ConstantTrend => &SURFACE_TREND,
    };
    if stat > s.max_stat {
        return 1.0;
    }
    if stat < s.min_stat {
        return 0.0;
    }
    let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, ci| acc * stat + ci);
    let z = if stat <= s.star_stat {
        poly(&s.small_p)
    } else {
        poly(&s.large_p)
    };
    normal_cdf(z)
}

/// MacKinnon p-value clamped to [1e-6, 1 - 1e-6].
pub fn mackinnon_p(stat: f64, variant: AdfVariant) -> f64 {
    mackinnon_p_raw(stat, variant).clamp(P_FLOOR, 1.0 - P_FLOOR)
}
