//! End-to-end analysis runs: load a config, run the stages, render tables,
//! figure data, a manifest and a text report, and write them atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde_json::json;

use crate::adf::{adf_test, AdfResult, AdfVariant, LagSelection};
use crate::chow::{
    break_fit_figure_data, chow_on_pairwise_returns, chow_on_rolling_corr, significance_stars, PairwiseChow,
    RollingChow, SERIAL_DEPENDENCE_CAVEAT,
};
use crate::dcc::{dcc_from_garch, DccFit, DccOptions, DccSeries};
use crate::error::{Error, Result};
use crate::garch::{fit_garch_returns, GarchFit};
use crate::ingest::{load_config, parse_price_csv_with, RunConfig};
use crate::rolling::{rolling_correlation, RollingCorrSeries};
use crate::series::{align_panel_with, compute_returns, descriptive_stats, DescriptiveRow, PriceSeries, ReturnPanel};

/// A break is called when the Chow p-value is below this.
pub const BREAK_LEVEL: f64 = 0.10;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Adf,
    Roll,
    Chow,
    Garch,
    Dcc,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Adf, Stage::Roll, Stage::Chow, Stage::Garch, Stage::Dcc];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Adf => "adf",
            Stage::Roll => "roll",
            Stage::Chow => "chow",
            Stage::Garch => "garch",
            Stage::Dcc => "dcc",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stage '{s}' (expected adf, roll, chow, garch or dcc)")))
    }
}

/// Prices and returns for every configured asset.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub prices: Vec<PriceSeries>,
    /// All aligned dates; rolling windows draw history from here.
    pub panel: ReturnPanel,
    /// Rows inside the configured pre/post span.
    pub analysis: ReturnPanel,
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    let field = cfg.price_field();
    let prices: Vec<PriceSeries> = cfg
        .assets
        .par_iter()
        .map(|a| parse_price_csv_with(&a.csv, &a.id, field).map_err(|e| e.context(format!("asset {}", a.id))))
        .collect::<Result<_>>()?;
    let returns = prices
        .iter()
        .map(|p| compute_returns(p, cfg.risk_free_daily))
        .collect::<Result<Vec<_>>>()?;
    let panel = align_panel_with(&returns, cfg.align)?;
    let analysis = panel.slice_dates(cfg.event.pre_start, cfg.event.post_end);
    if analysis.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no aligned dates between {} and {}",
            cfg.event.pre_start, cfg.event.post_end
        )));
    }
    log::info!(
        "loaded {} assets, {} aligned dates ({} in the analysis span)",
        prices.len(),
        panel.len(),
        analysis.len()
    );
    Ok(LoadedData { prices, panel, analysis })
}

#[derive(Clone, Debug)]
pub enum StageStatus<T> {
    Done(T),
    Skipped(String),
    NotRequested,
}

impl<T> StageStatus<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            StageStatus::Done(v) => Some(v),
            _ => None,
        }
    }

    fn label(&self) -> serde_json::Value {
        match self {
            StageStatus::Done(_) => json!("done"),
            StageStatus::Skipped(why) => json!({ "skipped": why }),
            StageStatus::NotRequested => json!("not_requested"),
        }
    }

    fn from_result(r: Result<T>, stage: &str) -> Self {
        match r {
            Ok(v) => StageStatus::Done(v),
            Err(e) => {
                log::warn!("stage {stage} skipped: {e}");
                StageStatus::Skipped(e.to_string())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdfRow {
    pub asset_id: String,
    pub result: AdfResult,
}

#[derive(Clone, Debug)]
pub struct ChowTables {
    pub pairwise: Vec<PairwiseChow>,
    pub rolling: Vec<RollingChow>,
}

#[derive(Clone, Debug)]
pub struct DccStage {
    pub fits: Vec<DccFit>,
    pub series: Vec<DccSeries>,
}

/// Everything a run computed, stage by stage.
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub adf: StageStatus<Vec<AdfRow>>,
    pub descriptive: StageStatus<Vec<DescriptiveRow>>,
    pub rolling: StageStatus<Vec<RollingCorrSeries>>,
    pub chow: StageStatus<ChowTables>,
    pub garch: StageStatus<IndexMap<String, GarchFit>>,
    pub dcc: StageStatus<DccStage>,
    pub timings_ms: IndexMap<String, f64>,
}

impl RunOutputs {
    fn empty() -> Self {
        RunOutputs {
            adf: StageStatus::NotRequested,
            descriptive: StageStatus::NotRequested,
            rolling: StageStatus::NotRequested,
            chow: StageStatus::NotRequested,
            garch: StageStatus::NotRequested,
            dcc: StageStatus::NotRequested,
            timings_ms: IndexMap::new(),
        }
    }

    /// (stage, reason) for every stage that was requested but skipped.
    pub fn skipped(&self) -> Vec<(&'static str, &str)> {
        fn why<T>(s: &StageStatus<T>) -> Option<&str> {
            match s {
                StageStatus::Skipped(w) => Some(w),
                _ => None,
            }
        }
        [
            ("adf", why(&self.adf)),
            ("descriptive", why(&self.descriptive)),
            ("roll", why(&self.rolling)),
            ("chow", why(&self.chow)),
            ("garch", why(&self.garch)),
            ("dcc", why(&self.dcc)),
        ]
        .into_iter()
        .filter_map(|(n, w)| w.map(|w| (n, w)))
        .collect()
    }

    pub fn any_skipped(&self) -> bool {
        !self.skipped().is_empty()
    }
}

pub fn run_adf(cfg: &RunConfig, data: &LoadedData) -> Result<Vec<AdfRow>> {
    let lags = LagSelection::Aic(cfg.adf_max_lags);
    data.analysis
        .asset_ids()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|id| {
            let result = adf_test(data.analysis.column(id)?, AdfVariant::Constant, lags)
                .map_err(|e| e.context(format!("ADF for {id}")))?;
            Ok(AdfRow {
                asset_id: id.to_string(),
                result,
            })
        })
        .collect()
}

pub fn run_descriptive(cfg: &RunConfig, data: &LoadedData) -> Result<Vec<DescriptiveRow>> {
    descriptive_stats(&data.analysis, &data.prices, &cfg.event)
}

/// One series per (other asset, window), base asset first in each pair.
pub fn run_rolling(cfg: &RunConfig, data: &LoadedData) -> Result<Vec<RollingCorrSeries>> {
    let jobs: Vec<(&str, usize)> = cfg
        .other_asset_ids()
        .into_iter()
        .flat_map(|o| cfg.windows.iter().map(move |w| (o, *w)))
        .collect();
    jobs.par_iter()
        .map(|(other, w)| rolling_correlation(&data.panel, &cfg.base_asset_id, other, *w))
        .collect()
}

pub fn run_chow(cfg: &RunConfig, data: &LoadedData, rolling: &[RollingCorrSeries]) -> Result<ChowTables> {
    let pairwise = cfg
        .other_asset_ids()
        .par_iter()
        .map(|o| {
            chow_on_pairwise_returns(&data.analysis, &cfg.event, &cfg.base_asset_id, o)
                .map_err(|e| e.context(format!("pairwise Chow {}~{o}", cfg.base_asset_id)))
        })
        .collect::<Result<_>>()?;
    let rolling = rolling
        .par_iter()
        .map(|s| {
            chow_on_rolling_corr(s, &cfg.event, cfg.chow_trend).map_err(|e| {
                e.context(format!("rolling Chow {}-{} {}", s.base_asset_id, s.other_asset_id, s.window))
            })
        })
        .collect::<Result<_>>()?;
    Ok(ChowTables { pairwise, rolling })
}

pub fn run_garch(cfg: &RunConfig, data: &LoadedData) -> Result<IndexMap<String, GarchFit>> {
    let ids: Vec<&str> = data.analysis.asset_ids().collect();
    let fits: Vec<(String, GarchFit)> = ids
        .par_iter()
        .map(|id| {
            let fit = fit_garch_returns(&data.analysis.series(id)?, &cfg.spec_for(id))?;
            Ok((id.to_string(), fit))
        })
        .collect::<Result<_>>()?;
    Ok(fits.into_iter().collect())
}

pub fn run_dcc(cfg: &RunConfig, data: &LoadedData, garch: &IndexMap<String, GarchFit>) -> Result<DccStage> {
    let opts = DccOptions {
        base_asset_id: cfg.base_asset_id.clone(),
        smoothing_halfwidth: cfg.smoothing_halfwidth,
        pairwise: cfg.dcc_pairwise,
    };
    let (fits, series) = dcc_from_garch(data.analysis.dates(), garch, &opts)?;
    Ok(DccStage { fits, series })
}

fn timed<T>(timings: &mut IndexMap<String, f64>, name: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
    out
}

/// Runs the requested stages plus whatever they depend on. With
/// `descriptive`, Table 2 statistics are computed too.
pub fn analyze(cfg: &RunConfig, data: &LoadedData, stages: &[Stage], descriptive: bool) -> RunOutputs {
    let wants = |s: Stage| stages.contains(&s);
    let mut out = RunOutputs::empty();
    let mut t = IndexMap::new();
    if wants(Stage::Adf) {
        out.adf = timed(&mut t, "adf", || StageStatus::from_result(run_adf(cfg, data), "adf"));
    }
    if descriptive {
        out.descriptive = timed(&mut t, "descriptive", || {
            StageStatus::from_result(run_descriptive(cfg, data), "descriptive")
        });
    }
    if wants(Stage::Roll) || wants(Stage::Chow) {
        out.rolling = timed(&mut t, "roll", || StageStatus::from_result(run_rolling(cfg, data), "roll"));
    }
    if wants(Stage::Chow) {
        out.chow = match &out.rolling {
            StageStatus::Done(r) => timed(&mut t, "chow", || StageStatus::from_result(run_chow(cfg, data, r), "chow")),
            _ => StageStatus::Skipped("rolling correlations unavailable".into()),
        };
    }
    if wants(Stage::Garch) || wants(Stage::Dcc) {
        out.garch = timed(&mut t, "garch", || StageStatus::from_result(run_garch(cfg, data), "garch"));
    }
    if wants(Stage::Dcc) {
        out.dcc = match &out.garch {
            StageStatus::Done(g) => timed(&mut t, "dcc", || StageStatus::from_result(run_dcc(cfg, data, g), "dcc")),
            _ => StageStatus::Skipped("univariate GARCH fits unavailable".into()),
        };
    }
    out.timings_ms = t;
    out
}

/// Asset ids reduced to file-name-safe characters.
pub fn file_token(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<&str>) -> Self {
        Table {
            comments: Vec::new(),
            header: header.into_iter().map(String::from).collect(),
            rows: Vec::new(),
        }
    }

    fn render(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidInput(format!("CSV encoding: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
        Ok(out)
    }
}

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Output files for the stages that completed, as (file name, contents).
pub fn render_files(cfg: &RunConfig, out: &RunOutputs, rolling_figures: bool) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    let base = &cfg.base_asset_id;
    if let Some(rows) = out.adf.done() {
        let mut t = Table::new(vec!["asset_id", "adf_statistic", "p_value", "lags_used", "max_lags", "n_obs", "variant"]);
        for r in rows {
            t.rows.push(vec![
                r.asset_id.clone(),
                num(r.result.adf_statistic),
                num(r.result.p_value),
                r.result.lags_used.to_string(),
                r.result.max_lags.to_string(),
                r.result.n_effective.to_string(),
                format!("{:?}", r.result.variant).to_lowercase(),
            ]);
        }
        files.push(("table1_adf.csv".into(), t.render()?));
    }
    if let Some(rows) = out.descriptive.done() {
        let mut t = Table::new(vec!["asset_id", "segment", "n", "mean_price", "std_price", "mean_return", "std_return"]);
        for r in rows {
            t.rows.push(vec![
                r.asset_id.clone(),
                r.segment.to_string(),
                r.n.to_string(),
                num(r.mean_price),
                num(r.std_price),
                num(r.mean_return),
                num(r.std_return),
            ]);
        }
        files.push(("table2_descriptive.csv".into(), t.render()?));
    }
    if let Some(chow) = out.chow.done() {
        let mut t = Table::new(vec![
            "base_asset_id",
            "other_asset_id",
            "chow_statistic",
            "p_value",
            "stars",
            "k",
            "n1",
            "n2",
            "rss_pooled",
            "rss_1",
            "rss_2",
            "break_confirmed",
        ]);
        for c in &chow.pairwise {
            let r = &c.result;
            t.rows.push(vec![
                c.base_asset_id.clone(),
                c.other_asset_id.clone(),
                num(r.chow_statistic),
                num(r.p_value),
                significance_stars(r.p_value).into(),
                r.k.to_string(),
                r.n1.to_string(),
                r.n2.to_string(),
                num(r.rss_pooled),
                num(r.rss_1),
                num(r.rss_2),
                yes_no(r.p_value < BREAK_LEVEL).into(),
            ]);
        }
        files.push(("table3_chow_pairwise.csv".into(), t.render()?));

        let mut t = Table::new(vec![
            "base_asset_id",
            "other_asset_id",
            "window",
            "design",
            "chow_statistic",
            "p_value",
            "stars",
            "k",
            "n1",
            "n2",
            "dropped_undefined",
            "structural_break",
        ]);
        t.comments.push(format!("caveat: {SERIAL_DEPENDENCE_CAVEAT}"));
        for c in &chow.rolling {
            let r = &c.result;
            t.rows.push(vec![
                c.base_asset_id.clone(),
                c.other_asset_id.clone(),
                c.window.to_string(),
                if c.trend { "constant+trend" } else { "constant" }.into(),
                num(r.chow_statistic),
                num(r.p_value),
                significance_stars(r.p_value).into(),
                r.k.to_string(),
                r.n1.to_string(),
                r.n2.to_string(),
                c.dropped_undefined.to_string(),
                yes_no(r.p_value < BREAK_LEVEL).into(),
            ]);
        }
        files.push(("table4_chow_rolling.csv".into(), t.render()?));

        for c in &chow.rolling {
            let fig = break_fit_figure_data(&c.result, &c.dates)?;
            let mut t = Table::new(vec!["date", "observed", "fitted_segmented", "fitted_pooled"]);
            t.comments.push(format!("breakpoint={}", fig.breakpoint));
            t.comments.push(format!("event_date={}", cfg.event.event_date));
            for r in &fig.rows {
                t.rows.push(vec![r.date.to_string(), num(r.observed), num(r.fitted_segmented), num(r.fitted_pooled)]);
            }
            let name = format!("fig2_{}_{}_{}.csv", file_token(&c.base_asset_id), file_token(&c.other_asset_id), c.window);
            files.push((name, t.render()?));
        }
    }
    if rolling_figures {
        if let Some(series) = out.rolling.done() {
            files.extend(render_fig1(cfg, series)?);
        }
    }
    if let Some(fits) = out.garch.done() {
        let mut t = Table::new(vec![
            "asset_id", "model", "parameter", "estimate", "std_error", "t_stat", "p_value", "stars", "return_scale",
        ]);
        for (id, f) in fits {
            let s = f.spec;
            let model = format!("ARMA({},{})-GARCH({},{})", s.ar, s.ma, s.p, s.q);
            for (i, (name, est)) in f.param_names.iter().zip(f.params.to_vec()).enumerate() {
                let pick = |v: &Option<Vec<f64>>| v.as_ref().map(|v| v[i]);
                let p = pick(&f.p_values);
                t.rows.push(vec![
                    id.clone(),
                    model.clone(),
                    name.clone(),
                    num(est),
                    opt_num(pick(&f.std_errors)),
                    opt_num(pick(&f.t_stats)),
                    opt_num(p),
                    p.map(significance_stars).unwrap_or("").into(),
                    num(f.scale),
                ]);
            }
        }
        files.push(("table5_garch.csv".into(), t.render()?));
    }
    if let Some(dcc) = out.dcc.done() {
        for s in &dcc.series {
            let mut t = Table::new(vec!["date", "rho_raw", "rho_smoothed"]);
            t.comments.push(format!("event_date={}", cfg.event.event_date));
            t.comments.push(format!("smoothing_halfwidth={}", s.halfwidth));
            for ((d, raw), (_, sm)) in s.observations.iter().zip(&s.smoothed) {
                t.rows.push(vec![d.to_string(), num(*raw), num(*sm)]);
            }
            let name = format!("fig3_{}_{}.csv", file_token(base), file_token(&s.other_asset_id));
            files.push((name, t.render()?));
        }
    }
    Ok(files)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// One file per pair with a column per window, clipped to the analysis span.
fn render_fig1(cfg: &RunConfig, series: &[RollingCorrSeries]) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    for other in cfg.other_asset_ids() {
        let mine: Vec<&RollingCorrSeries> = series.iter().filter(|s| s.other_asset_id == other).collect();
        let mut by_date: std::collections::BTreeMap<_, Vec<Option<f64>>> = Default::default();
        for (j, s) in mine.iter().enumerate() {
            for (d, v) in &s.observations {
                if *d < cfg.event.pre_start || *d > cfg.event.post_end {
                    continue;
                }
                by_date.entry(*d).or_insert_with(|| vec![None; mine.len()])[j] = *v;
            }
        }
        let mut t = Table::new(vec!["date"]);
        t.header.extend(mine.iter().map(|s| format!("corr_{}", s.window)));
        t.comments.push(format!("event_date={}", cfg.event.event_date));
        for (d, vals) in by_date {
            t.rows.push(std::iter::once(d.to_string()).chain(vals.into_iter().map(opt_num)).collect());
        }
        let name = format!("fig1_{}_{}.csv", file_token(&cfg.base_asset_id), file_token(other));
        files.push((name, t.render()?));
    }
    Ok(files)
}

/// Fixed-point decimal with `places` digits, with a leading minus dropped
/// from values that round to zero.
pub fn fixed(v: f64, places: usize) -> String {
    let s = format!("{v:.places$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn stat_with_stars(v: f64, p: f64) -> String {
    format!("{}{}", fixed(v, 4), significance_stars(p))
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn section<T>(out: &mut String, title: &str, status: &StageStatus<T>, body: impl FnOnce(&T) -> String) {
    let _ = writeln!(out, "{title}");
    match status {
        StageStatus::Done(v) => out.push_str(&body(v)),
        StageStatus::Skipped(why) => {
            let _ = writeln!(out, "[stage skipped: {why}]");
        }
        StageStatus::NotRequested => out.push_str("[stage skipped: not requested]\n"),
    }
    out.push('\n');
}

fn asset_name(cfg: &RunConfig, id: &str) -> String {
    cfg.asset(id).map(|a| a.name.clone()).unwrap_or_else(|_| id.to_string())
}

/// Plain-text view of the run. Every figure shown is a rounded copy of a
/// value in the CSV outputs.
pub fn render_report(cfg: &RunConfig, out: &RunOutputs) -> String {
    let mut r = String::new();
    let _ = writeln!(r, "Correlation regime-change report");
    let _ = writeln!(
        r,
        "event date {}; pre {}..{}; post {}..{}; base asset {}\n",
        cfg.event.event_date,
        cfg.event.pre_start,
        cfg.event.pre_end,
        cfg.event.post_start,
        cfg.event.post_end,
        asset_name(cfg, &cfg.base_asset_id)
    );

    section(&mut r, "Table 1. ADF test on excess returns (constant, AIC lags)", &out.adf, |rows| {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|a| {
                vec![
                    asset_name(cfg, &a.asset_id),
                    fixed(a.result.adf_statistic, 4),
                    fixed(a.result.p_value, 4),
                    a.result.lags_used.to_string(),
                ]
            })
            .collect();
        aligned(&["Asset", "ADF statistic", "P-value", "Lags"], &body)
    });

    section(&mut r, "Table 2. Descriptive statistics of prices and returns", &out.descriptive, |rows| {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|d| {
                vec![
                    asset_name(cfg, &d.asset_id),
                    d.segment.to_string(),
                    d.n.to_string(),
                    fixed(d.mean_price, 1),
                    fixed(d.std_price, 1),
                    fixed(d.mean_return, 4),
                    fixed(d.std_return, 4),
                ]
            })
            .collect();
        aligned(&["Asset", "Segment", "N", "Mean price", "Std price", "Mean ret", "Std ret"], &body)
    });

    section(&mut r, "Table 3. Chow test on pairwise OLS regressions", &out.chow, |c| {
        let body: Vec<Vec<String>> = c
            .pairwise
            .iter()
            .map(|p| {
                vec![
                    format!("{} excess return", asset_name(cfg, &p.other_asset_id)),
                    stat_with_stars(p.result.chow_statistic, p.result.p_value),
                    fixed(p.result.p_value, 4),
                    yes_no(p.result.p_value < BREAK_LEVEL).to_string(),
                ]
            })
            .collect();
        aligned(&["Independent variable", "Chow statistic", "P-value", "Break confirmed?"], &body)
    });

    section(&mut r, "Table 4. Chow test on rolling correlation series", &out.chow, |c| {
        let body: Vec<Vec<String>> = c
            .rolling
            .iter()
            .map(|p| {
                vec![
                    format!(
                        "Corr {}-{} ({}-day)",
                        asset_name(cfg, &p.base_asset_id),
                        asset_name(cfg, &p.other_asset_id),
                        p.window
                    ),
                    stat_with_stars(p.result.chow_statistic, p.result.p_value),
                    fixed(p.result.p_value, 4),
                    yes_no(p.result.p_value < BREAK_LEVEL).to_string(),
                ]
            })
            .collect();
        let mut s = aligned(&["Dependent variable", "Chow statistic", "P-value", "Structural break?"], &body);
        let _ = writeln!(s, "Note: {SERIAL_DEPENDENCE_CAVEAT}");
        s
    });

    section(&mut r, "Table 5. ARMA-GARCH coefficients (percent returns)", &out.garch, |fits| {
        let mut s = String::new();
        for (id, f) in fits {
            let sp = f.spec;
            let _ = writeln!(s, "{} ARMA({},{})-GARCH({},{})", asset_name(cfg, id), sp.ar, sp.ma, sp.p, sp.q);
            let body: Vec<Vec<String>> = f
                .param_names
                .iter()
                .zip(f.params.to_vec())
                .enumerate()
                .map(|(i, (name, est))| {
                    let t = f.t_stats.as_ref().map(|v| v[i]);
                    let p = f.p_values.as_ref().map(|v| v[i]);
                    vec![
                        name.clone(),
                        match p {
                            Some(p) => stat_with_stars(est, p),
                            None => fixed(est, 4),
                        },
                        t.map_or("n/a".into(), |t| fixed(t, 4)),
                        p.map_or("n/a".into(), |p| fixed(p, 4)),
                    ]
                })
                .collect();
            s.push_str(&aligned(&["Parameter", "Coef", "T statistic", "P-value"], &body));
            s.push('\n');
        }
        s.push_str("Stars: *** p<0.01, ** p<0.05, * p<0.10\n");
        s
    });

    section(&mut r, "Figure 3 data. DCC correlations (smoothed)", &out.dcc, |d| {
        let mut s = String::new();
        for f in &d.fits {
            if f.degenerate {
                let _ = writeln!(s, "system {}: singular residual correlation, static model", f.asset_ids.join(","));
            }
        }
        for series in &d.series {
            let _ = writeln!(
                s,
                "fig3_{}_{}.csv ({} dates)",
                file_token(&series.base_asset_id),
                file_token(&series.other_asset_id),
                series.observations.len()
            );
        }
        s
    });
    r
}

/// Machine-readable record of the run. Timings sit under their own key so
/// comparisons can drop them.
pub fn build_manifest(cfg: &RunConfig, data: &LoadedData, out: &RunOutputs, files: &[String]) -> serde_json::Value {
    let adf = out.adf.done().map(|rows| {
        rows.iter()
            .map(|a| (a.asset_id.clone(), json!({ "lags_used": a.result.lags_used, "max_lags": a.result.max_lags })))
            .collect::<serde_json::Map<_, _>>()
    });
    let garch = out.garch.done().map(|fits| {
        fits.iter()
            .map(|(id, f)| {
                (
                    id.clone(),
                    json!({
                        "spec": f.spec,
                        "return_scale": f.scale,
                        "loglik": f.loglik,
                        "iterations": f.iterations,
                        "evaluations": f.evaluations,
                        "std_errors_available": f.std_errors.is_some(),
                    }),
                )
            })
            .collect::<serde_json::Map<_, _>>()
    });
    let dcc = out.dcc.done().map(|d| {
        json!({
            "fits": d.fits,
            "smoothing_halfwidth": cfg.smoothing_halfwidth,
            "pairwise": cfg.dcc_pairwise,
        })
    });
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "defaults_applied": cfg.defaults_applied,
        "warnings": cfg.warnings,
        "data": {
            "aligned_dates": data.panel.len(),
            "analysis_dates": data.analysis.len(),
            "first_date": data.panel.dates().first(),
            "last_date": data.panel.dates().last(),
        },
        "stages": {
            "adf": { "status": out.adf.label(), "variant": "constant", "lag_selection": "aic", "per_asset": adf },
            "descriptive": { "status": out.descriptive.label() },
            "roll": { "status": out.rolling.label(), "windows": cfg.windows },
            "chow": { "status": out.chow.label(), "trend": cfg.chow_trend, "break_level": BREAK_LEVEL },
            "garch": { "status": out.garch.label(), "per_asset": garch },
            "dcc": { "status": out.dcc.label(), "detail": dcc },
        },
        "files": files,
        "timings_ms": out.timings_ms,
    })
}

/// Writes every file into a staging directory next to `dir`, then moves
/// them into place. Nothing lands in `dir` unless all files were written.
pub fn write_atomically(dir: &Path, files: &[(String, String)]) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
    let result = (|| {
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        for (file, content) in files {
            let p = staging.join(file);
            fs::write(&p, content).map_err(|e| Error::io(&p, e))?;
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (file, _) in files {
            let (from, to) = (staging.join(file), dir.join(file));
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&staging);
    result
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub outputs: RunOutputs,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.outputs.any_skipped() {
            EXIT_PARTIAL
        } else {
            EXIT_OK
        }
    }
}

/// Full run: every stage, all tables and figures, manifest and report.
pub fn cmd_run(config_path: &Path, out_override: Option<&Path>) -> Result<RunSummary> {
    let cfg = load_config(config_path)?;
    let data = load_data(&cfg)?;
    let outputs = analyze(&cfg, &data, &Stage::ALL, true);
    let mut files = render_files(&cfg, &outputs, true)?;
    files.push(("report.txt".into(), render_report(&cfg, &outputs)));
    let mut names: Vec<String> = files.iter().map(|f| f.0.clone()).collect();
    names.push("manifest.json".into());
    let manifest = build_manifest(&cfg, &data, &outputs, &names);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))? + "\n";
    files.push(("manifest.json".into(), text));
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    write_atomically(&out_dir, &files)?;
    log::info!("wrote {} files to {}", files.len(), out_dir.display());
    Ok(RunSummary {
        out_dir,
        files: names,
        outputs,
    })
}

/// Runs one stage (and its in-memory prerequisites) and writes only that
/// stage's files.
pub fn cmd_stage(stage: Stage, config_path: &Path, out_override: Option<&Path>) -> Result<RunSummary> {
    let cfg = load_config(config_path)?;
    let data = load_data(&cfg)?;
    let mut outputs = analyze(&cfg, &data, &[stage], false);
    // prerequisites computed only in memory are not written
    let mut shown = RunOutputs::empty();
    match stage {
        Stage::Adf => shown.adf = outputs.adf.clone(),
        Stage::Roll => shown.rolling = outputs.rolling.clone(),
        Stage::Chow => shown.chow = outputs.chow.clone(),
        Stage::Garch => shown.garch = outputs.garch.clone(),
        Stage::Dcc => shown.dcc = outputs.dcc.clone(),
    }
    let files = render_files(&cfg, &shown, stage == Stage::Roll)?;
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    write_atomically(&out_dir, &files)?;
    shown.timings_ms = std::mem::take(&mut outputs.timings_ms);
    Ok(RunSummary {
        out_dir,
        files: files.into_iter().map(|f| f.0).collect(),
        outputs: shown,
    })
}

/// Maps a command outcome to the process exit status.
pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(s) => s.exit_code(),
        Err(_) => EXIT_FATAL,
    }
}

/// Configures logging from `CORRBREAK_LOG` (quiet, info or debug; default
/// shows warnings).
pub fn init_logging() {
    let level = match std::env::var("CORRBREAK_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Error,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}
