//! Chow structural-break tests at a known breakpoint.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linreg::{constant_design, ols, with_intercept, OlsFit};
use crate::numerics::f_sf;
use crate::rolling::RollingCorrSeries;
use crate::series::{segment, EventWindow, ReturnPanel, TradingDate};

/// Caveat attached to F p-values computed on overlapping-window series.
pub const SERIAL_DEPENDENCE_CAVEAT: &str =
    "rolling-window observations overlap; F p-values assume independent errors and overstate significance";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChowResult {
    pub chow_statistic: f64,
    pub p_value: f64,
    pub k: usize,
    pub n1: usize,
    pub n2: usize,
    pub rss_pooled: f64,
    pub rss_1: f64,
    pub rss_2: f64,
    #[serde(skip)]
    pub fit_pre: OlsFit,
    #[serde(skip)]
    pub fit_post: OlsFit,
    #[serde(skip)]
    pub fit_pooled: OlsFit,
    #[serde(skip)]
    pub observed: Vec<f64>,
}

impl ChowResult {
    pub fn dof(&self) -> (usize, usize) {
        (self.k, self.n1 + self.n2 - 2 * self.k)
    }
}

fn rows(x: &DMatrix<f64>, lo: usize, hi: usize) -> DMatrix<f64> {
    x.rows(lo, hi - lo).into_owned()
}

/// Chow F-test for a coefficient change between rows `..break_index` and
/// `break_index..`.
pub fn chow_test(y: &[f64], x: &DMatrix<f64>, break_index: usize) -> Result<ChowResult> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    let (n1, n2) = (break_index, n.saturating_sub(break_index));
    if n1 <= k || n2 <= k {
        return Err(Error::InsufficientData(format!(
            "each segment needs more than k={k} observations, got n1={n1}, n2={n2}"
        )));
    }
    let label = |name: &'static str| {
        move |e: Error| match e {
            Error::SingularDesign { detail, .. } => Error::SingularDesign {
                fit: name.to_string(),
                detail,
            },
            other => other.context(format!("{name} fit")),
        }
    };
    let fit_pooled = ols(y, x, true).map_err(label("pooled"))?;
    let fit_pre = ols(&y[..n1], &rows(x, 0, n1), true).map_err(label("pre"))?;
    let fit_post = ols(&y[n1..], &rows(x, n1, n), true).map_err(label("post"))?;

    let (rss_pooled, rss_1, rss_2) = (fit_pooled.rss, fit_pre.rss, fit_post.rss);
    let unrestricted = rss_1 + rss_2;
    let dof2 = n1 + n2 - 2 * k;
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let numerator = (rss_pooled - unrestricted).max(0.0) / k as f64;
    let denominator = unrestricted / dof2 as f64;
    // exact fits in every segment: no evidence either way unless the pooled fit misses
    let statistic = if numerator <= 1e-14 * scale {
        0.0
    } else if denominator <= 0.0 {
        f64::INFINITY
    } else {
        numerator / denominator
    };
    let p_value = f_sf(statistic, k as u32, dof2 as u32)?;

    Ok(ChowResult {
        chow_statistic: statistic,
        p_value,
        k,
        n1,
        n2,
        rss_pooled,
        rss_1,
        rss_2,
        fit_pre,
        fit_post,
        fit_pooled,
        observed: y.to_vec(),
    })
}

/// Chow test of `base = α + β·other + ε` across the event, using only the
/// configured pre and post segments.
pub fn chow_on_pairwise_returns(panel: &ReturnPanel, window: &EventWindow, base_id: &str, other_id: &str) -> Result<PairwiseChow> {
    let (pre, post) = segment(panel, window)?;
    let mut y = pre.column(base_id)?.to_vec();
    y.extend_from_slice(post.column(base_id)?);
    let mut x = pre.column(other_id)?.to_vec();
    x.extend_from_slice(post.column(other_id)?);
    let mut dates = pre.dates().to_vec();
    dates.extend_from_slice(post.dates());
    let result = chow_test(&y, &with_intercept(&[&x]), pre.len())?;
    Ok(PairwiseChow {
        base_asset_id: base_id.to_string(),
        other_asset_id: other_id.to_string(),
        dates,
        result,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseChow {
    pub base_asset_id: String,
    pub other_asset_id: String,
    #[serde(skip)]
    pub dates: Vec<TradingDate>,
    #[serde(flatten)]
    pub result: ChowResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RollingChow {
    pub base_asset_id: String,
    pub other_asset_id: String,
    pub window: usize,
    pub dropped_undefined: usize,
    pub trend: bool,
    #[serde(skip)]
    pub dates: Vec<TradingDate>,
    #[serde(flatten)]
    pub result: ChowResult,
}

/// Mean-shift Chow test on a rolling-correlation series, split by window end
/// date. Observations dated on the event day and undefined windows are
/// dropped. With `trend`, a linear time trend joins the constant.
pub fn chow_on_rolling_corr(series: &RollingCorrSeries, window: &EventWindow, trend: bool) -> Result<RollingChow> {
    let (defined, dropped) = series.defined();
    if dropped > 0 {
        log::info!(
            "{}-{} {}-day correlation: dropped {dropped} undefined windows before Chow test",
            series.base_asset_id,
            series.other_asset_id,
            series.window
        );
    }
    let pre: Vec<_> = defined.iter().filter(|(d, _)| window.in_pre(*d)).collect();
    let post: Vec<_> = defined.iter().filter(|(d, _)| window.in_post(*d)).collect();
    if pre.len() < 2 || post.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "rolling series needs > 1 observation on each side of {}, got {} and {}",
            window.event_date,
            pre.len(),
            post.len()
        )));
    }
    let dates: Vec<TradingDate> = pre.iter().chain(&post).map(|(d, _)| *d).collect();
    let y: Vec<f64> = pre.iter().chain(&post).map(|(_, v)| *v).collect();
    let x = if trend {
        let t: Vec<f64> = (1..=y.len()).map(|i| i as f64).collect();
        with_intercept(&[&t])
    } else {
        constant_design(y.len())
    };
    let result = chow_test(&y, &x, pre.len())?;
    Ok(RollingChow {
        base_asset_id: series.base_asset_id.clone(),
        other_asset_id: series.other_asset_id.clone(),
        window: series.window,
        dropped_undefined: dropped,
        trend,
        dates,
        result,
    })
}

/// One row of structural-break figure data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakFitRow {
    pub date: TradingDate,
    pub observed: f64,
    pub fitted_segmented: f64,
    pub fitted_pooled: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BreakFitData {
    pub breakpoint: TradingDate,
    pub rows: Vec<BreakFitRow>,
}

/// Observed values with segment-wise and pooled fitted values per date.
pub fn break_fit_figure_data(result: &ChowResult, dates: &[TradingDate]) -> Result<BreakFitData> {
    let n = result.n1 + result.n2;
    if dates.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} dates for {n} observations",
            dates.len()
        )));
    }
    let y = &result.observed;
    let seg_resid = result.fit_pre.residuals.iter().chain(&result.fit_post.residuals);
    let rows = dates
        .iter()
        .zip(y)
        .zip(seg_resid.zip(&result.fit_pooled.residuals))
        .map(|((d, obs), (e_seg, e_pool))| BreakFitRow {
            date: *d,
            observed: *obs,
            fitted_segmented: obs - e_seg,
            fitted_pooled: obs - e_pool,
        })
        .collect();
    Ok(BreakFitData {
        breakpoint: dates[result.n1],
        rows,
    })
}

/// Significance marker: *** p<0.01, ** p<0.05, * p<0.10.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linreg::design_from_columns;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn pooled_t_squared(a: &[f64], b: &[f64]) -> f64 {
        let (n1, n2) = (a.len() as f64, b.len() as f64);
        let m1 = a.iter().sum::<f64>() / n1;
        let m2 = b.iter().sum::<f64>() / n2;
        let ss1: f64 = a.iter().map(|v| (v - m1).powi(2)).sum();
        let ss2: f64 = b.iter().map(|v| (v - m2).powi(2)).sum();
        let sp2 = (ss1 + ss2) / (n1 + n2 - 2.0);
        let t = (m1 - m2) / (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt();
        t * t
    }

    #[test]
    fn exact_linear_relation_has_no_break() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.7 * v).collect();
        let r = chow_test(&y, &with_intercept(&[&x]), 15).unwrap();
        assert_eq!(r.chow_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn coefficient_flip_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let e: f64 = rng.sample::<f64, _>(StandardNormal) * 0.1;
                if i < 100 { 1.0 + 2.0 * v + e } else { 5.0 - v + e }
            })
            .collect();
        let design = with_intercept(&[&x]);
        let r = chow_test(&y, &design, 100).unwrap();
        assert!(r.p_value < 1e-6);

        // three independent fits assembled by hand
        let pooled = ols(&y, &design, true).unwrap().rss;
        let a = ols(&y[..100], &with_intercept(&[&x[..100]]), true).unwrap().rss;
        let b = ols(&y[100..], &with_intercept(&[&x[100..]]), true).unwrap().rss;
        let want = ((pooled - (a + b)) / 2.0) / ((a + b) / 196.0);
        assert!((r.chow_statistic - want).abs() < 1e-10 * want);
    }

    #[test]
    fn segments_too_small() {
        let x = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let y = vec![1.0, 2.0, 1.5, 0.5, 0.7];
        assert!(matches!(chow_test(&y, &with_intercept(&[&x]), 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn singular_segment_named() {
        // regressor constant in the pre segment
        let x = vec![1.0, 1.0, 1.0, 1.0, 0.3, 0.9, 0.2, 0.5];
        let y = vec![0.1, 0.4, 0.2, 0.3, 0.5, 0.1, 0.3, 0.2];
        match chow_test(&y, &with_intercept(&[&x]), 4) {
            Err(Error::SingularDesign { fit, .. }) => assert_eq!(fit, "pre"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_series_equals_squared_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut y: Vec<f64> = (0..60).map(|_| 0.1 + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        y.extend((0..60).map(|_| 0.5 + 0.01 * rng.sample::<f64, _>(StandardNormal)));
        let r = chow_test(&y, &constant_design(120), 60).unwrap();
        let t2 = pooled_t_squared(&y[..60], &y[60..]);
        assert!((r.chow_statistic - t2).abs() < 1e-9 * t2);
        assert!(r.chow_statistic > 1e4);
        assert!(r.p_value < 1e-12);

        let dates: Vec<TradingDate> = {
            let mut d: TradingDate = "2024-01-01".parse().unwrap();
            (0..120).map(|_| { let c = d; d = d.succ(); c }).collect()
        };
        let fig = break_fit_figure_data(&r, &dates).unwrap();
        let m1 = y[..60].iter().sum::<f64>() / 60.0;
        let m2 = y[60..].iter().sum::<f64>() / 60.0;
        assert!((fig.rows[0].fitted_segmented - m1).abs() < 1e-12);
        assert!((fig.rows[119].fitted_segmented - m2).abs() < 1e-12);
        assert_eq!(fig.breakpoint, dates[60]);
    }

    #[test]
    fn exact_linear_figure_reproduces_observed() {
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 0.5 * v).collect();
        let r = chow_test(&y, &with_intercept(&[&x]), 6).unwrap();
        let dates: Vec<TradingDate> = {
            let mut d: TradingDate = "2024-01-01".parse().unwrap();
            (0..12).map(|_| { let c = d; d = d.succ(); c }).collect()
        };
        let fig = break_fit_figure_data(&r, &dates).unwrap();
        for row in fig.rows {
            assert!((row.fitted_segmented - row.observed).abs() < 1e-12);
            assert!((row.fitted_pooled - row.observed).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_series_statistic_zero() {
        let y = vec![0.3; 40];
        let r = chow_test(&y, &constant_design(40), 20).unwrap();
        assert_eq!(r.chow_statistic, 0.0);
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.0002), "***");
        assert_eq!(significance_stars(0.03), "**");
        assert_eq!(significance_stars(0.0991), "*");
        assert_eq!(significance_stars(0.867), "");
    }

    proptest! {
        #[test]
        fn k1_identity_and_invariances(
            ys in prop::collection::vec(-1.0f64..1.0, 6..60),
            cut in 0.2f64..0.8, a in 0.1f64..10.0, b in -3.0f64..3.0,
        ) {
            let n = ys.len();
            let brk = ((n as f64 * cut) as usize).clamp(2, n - 2);
            let r = chow_test(&ys, &constant_design(n), brk).unwrap();
            let t2 = pooled_t_squared(&ys[..brk], &ys[brk..]);
            prop_assert!((r.chow_statistic - t2).abs() <= 1e-9 * (1.0 + t2));
            prop_assert!(r.rss_1 + r.rss_2 <= r.rss_pooled + 1e-8 * (1.0 + r.rss_pooled));

            let scaled: Vec<f64> = ys.iter().map(|v| a * v + b).collect();
            let rs = chow_test(&scaled, &constant_design(n), brk).unwrap();
            prop_assert!((rs.chow_statistic - r.chow_statistic).abs() <= 1e-8 * (1.0 + r.chow_statistic));

            let rev: Vec<f64> = ys.iter().rev().copied().collect();
            let rr = chow_test(&rev, &constant_design(n), n - brk).unwrap();
            prop_assert!((rr.chow_statistic - r.chow_statistic).abs() <= 1e-8 * (1.0 + r.chow_statistic));
        }

        #[test]
        fn regression_form_matches_direct_formula(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12..80),
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let n = x.len();
            let brk = n / 2;
            let design = design_from_columns(&[&vec![1.0; n], &x]);
            let r = chow_test(&y, &design, brk).unwrap();
            let pooled = ols(&y, &design, true).unwrap().rss;
            let a = ols(&y[..brk], &with_intercept(&[&x[..brk]]), true).unwrap().rss;
            let b = ols(&y[brk..], &with_intercept(&[&x[brk..]]), true).unwrap().rss;
            let want = ((pooled - (a + b)) / 2.0) / ((a + b) / (n - 4) as f64);
            prop_assert!((r.chow_statistic - want.max(0.0)).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}
