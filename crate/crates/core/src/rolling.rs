//! Trailing-window Pearson correlation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{ReturnPanel, TradingDate};

pub const MIN_WINDOW: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RollingCorrSeries {
    pub base_asset_id: String,
    pub other_asset_id: String,
    pub window: usize,
    /// Correlation labelled with the window's last date; `None` where either
    /// column is constant inside the window.
    pub observations: Vec<(TradingDate, Option<f64>)>,
}

impl RollingCorrSeries {
    /// Defined observations only, plus the number dropped.
    pub fn defined(&self) -> (Vec<(TradingDate, f64)>, usize) {
        let kept: Vec<_> = self
            .observations
            .iter()
            .filter_map(|(d, v)| v.map(|v| (*d, v)))
            .collect();
        let dropped = self.observations.len() - kept.len();
        (kept, dropped)
    }
}

/// Pearson correlation of two equal-length slices with means taken over the
/// slices themselves. Returns `None` for a zero-variance input.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_flat(x, sxx) || is_flat(y, syy) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

// centred sum of squares indistinguishable from rounding noise
fn is_flat(v: &[f64], centred_ss: f64) -> bool {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let noise = 16.0 * f64::EPSILON * scale;
    centred_ss <= v.len() as f64 * noise * noise
}

/// Correlation between `x_id` and `y_id` over every trailing window of `window`
/// panel rows.
pub fn rolling_correlation(panel: &ReturnPanel, x_id: &str, y_id: &str, window: usize) -> Result<RollingCorrSeries> {
    let x = panel.column(x_id)?;
    let y = panel.column(y_id)?;
    if window < MIN_WINDOW {
        return Err(Error::Window(format!("window {window} below minimum {MIN_WINDOW}")));
    }
    if window > panel.len() {
        return Err(Error::Window(format!(
            "window {window} exceeds panel length {}",
            panel.len()
        )));
    }
    let observations = (window - 1..panel.len())
        .map(|end| {
            let lo = end + 1 - window;
            (panel.dates()[end], pearson(&x[lo..=end], &y[lo..=end]))
        })
        .collect();
    Ok(RollingCorrSeries {
        base_asset_id: x_id.to_string(),
        other_asset_id: y_id.to_string(),
        window,
        observations,
    })
}
