//! Dated price and return series, calendar alignment and event-window
//! segmentation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A calendar date without time of day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TradingDate(NaiveDate);

impl TradingDate {
    pub const MIN: TradingDate = TradingDate(NaiveDate::MIN);
    pub const MAX: TradingDate = TradingDate(NaiveDate::MAX);

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(TradingDate)
            .ok_or_else(|| Error::InvalidInput(format!("invalid date {year}-{month}-{day}")))
    }

    pub fn naive(self) -> NaiveDate {
        self.0
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    pub fn succ(self) -> Self {
        TradingDate(self.0.succ_opt().unwrap_or(NaiveDate::MAX))
    }

    pub fn pred(self) -> Self {
        TradingDate(self.0.pred_opt().unwrap_or(NaiveDate::MIN))
    }

    pub fn weekday(self) -> chrono::Weekday {
        self.0.weekday()
    }
}

impl From<NaiveDate> for TradingDate {
    fn from(d: NaiveDate) -> Self {
        TradingDate(d)
    }
}

impl fmt::Display for TradingDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for TradingDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(TradingDate)
            .map_err(|e| Error::InvalidInput(format!("bad date '{s}': {e}")))
    }
}

impl Serialize for TradingDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TradingDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_increasing<T>(asset: &str, obs: &[(TradingDate, T)]) -> Result<()> {
    for w in obs.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidInput(format!(
                "{asset}: dates not strictly increasing at {}",
                w[1].0
            )));
        }
    }
    Ok(())
}

/// Dated closing prices for a single asset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceSeries {
    asset_id: String,
    observations: Vec<(TradingDate, f64)>,
}

impl PriceSeries {
    pub fn new(asset_id: impl Into<String>, observations: Vec<(TradingDate, f64)>) -> Result<Self> {
        let asset_id = asset_id.into();
        if observations.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{asset_id}: price series needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        if let Some((d, p)) = observations.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "{asset_id}: non-positive price {p} on {d}"
            )));
        }
        check_increasing(&asset_id, &observations)?;
        Ok(PriceSeries {
            asset_id,
            observations,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn observations(&self) -> &[(TradingDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = TradingDate> + '_ {
        self.observations.iter().map(|(d, _)| *d)
    }

    pub fn price_on(&self, date: TradingDate) -> Option<f64> {
        self.observations
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.observations[i].1)
    }

    /// Last price dated on or before `date`.
    pub fn price_at_or_before(&self, date: TradingDate) -> Option<f64> {
        let i = self.observations.partition_point(|(d, _)| *d <= date);
        i.checked_sub(1).map(|i| self.observations[i].1)
    }
}

/// Dated excess returns for a single asset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnSeries {
    asset_id: String,
    observations: Vec<(TradingDate, f64)>,
}

impl ReturnSeries {
    pub fn new(asset_id: impl Into<String>, observations: Vec<(TradingDate, f64)>) -> Result<Self> {
        let asset_id = asset_id.into();
        if let Some((d, _)) = observations.iter().find(|(_, r)| !r.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{asset_id}: non-finite return on {d}"
            )));
        }
        check_increasing(&asset_id, &observations)?;
        Ok(ReturnSeries {
            asset_id,
            observations,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn observations(&self) -> &[(TradingDate, f64)] {
        &self.observations
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|(_, r)| *r).collect()
    }

    pub fn dates(&self) -> Vec<TradingDate> {
        self.observations.iter().map(|(d, _)| *d).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Log return minus a constant daily risk-free rate, dated at the later
/// observation.
pub fn compute_returns(prices: &PriceSeries, risk_free_daily: f64) -> Result<ReturnSeries> {
    if !(risk_free_daily.is_finite() && risk_free_daily >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "risk-free rate must be finite and non-negative, got {risk_free_daily}"
        )));
    }
    if prices.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 prices",
            prices.asset_id
        )));
    }
    let obs = prices
        .observations
        .windows(2)
        .map(|w| (w[1].0, (w[1].1 / w[0].1).ln() - risk_free_daily))
        .collect();
    ReturnSeries::new(prices.asset_id.clone(), obs)
}

/// How assets trading on different calendars are put on common dates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignPolicy {
    /// Keep only dates on which every asset has a return.
    #[default]
    Intersection,
    /// Keep every date inside the common span; an asset without a
    /// quote on a date gets a zero return there (its price carried
    /// forward).
    ForwardFill,
}

/// Date-aligned return columns, one per asset, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<TradingDate>,
    columns: IndexMap<String, Vec<f64>>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<TradingDate>, columns: IndexMap<String, Vec<f64>>) -> Result<Self> {
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(format!(
                    "panel dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        for (id, col) in &columns {
            if col.len() != dates.len() {
                return Err(Error::InvalidInput(format!(
                    "column {id} has {} rows, panel has {}",
                    col.len(),
                    dates.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("column {id} has non-finite cells")));
            }
        }
        Ok(ReturnPanel { dates, columns })
    }

    pub fn dates(&self) -> &[TradingDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn asset_ids(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, asset_id: &str) -> Result<&[f64]> {
        self.columns
            .get(asset_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(asset_id.to_string()))
    }

    pub fn columns(&self) -> &IndexMap<String, Vec<f64>> {
        &self.columns
    }

    /// The column as a dated return series.
    pub fn series(&self, asset_id: &str) -> Result<ReturnSeries> {
        let col = self.column(asset_id)?;
        ReturnSeries::new(
            asset_id,
            self.dates.iter().copied().zip(col.iter().copied()).collect(),
        )
    }

    /// Rows whose date falls in `[start, end]`.
    pub fn slice_dates(&self, start: TradingDate, end: TradingDate) -> ReturnPanel {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        let hi = hi.max(lo);
        ReturnPanel {
            dates: self.dates[lo..hi].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v[lo..hi].to_vec()))
                .collect(),
        }
    }
}

/// Aligns return series on their common dates.
pub fn align_panel(series: &[ReturnSeries]) -> Result<ReturnPanel> {
    align_panel_with(series, AlignPolicy::Intersection)
}

pub fn align_panel_with(series: &[ReturnSeries], policy: AlignPolicy) -> Result<ReturnPanel> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "alignment needs at least 2 series, got {}",
            series.len()
        )));
    }
    if let Some(s) = series.iter().find(|s| s.is_empty()) {
        return Err(Error::InsufficientData(format!("{}: empty return series", s.asset_id)));
    }
    let mut seen = BTreeSet::new();
    for s in series {
        if !seen.insert(s.asset_id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate asset id {}", s.asset_id)));
        }
    }

    let dates: Vec<TradingDate> = match policy {
        AlignPolicy::Intersection => {
            let mut common: BTreeSet<TradingDate> = series[0].dates().into_iter().collect();
            for s in &series[1..] {
                let other: BTreeSet<TradingDate> = s.dates().into_iter().collect();
                common = common.intersection(&other).copied().collect();
            }
            common.into_iter().collect()
        }
        AlignPolicy::ForwardFill => {
            let start = series.iter().map(|s| s.observations[0].0).max().unwrap();
            let end = series
                .iter()
                .map(|s| s.observations[s.len() - 1].0)
                .min()
                .unwrap();
            let all: BTreeSet<TradingDate> = series
                .iter()
                .flat_map(|s| s.observations.iter().map(|(d, _)| *d))
                .filter(|d| *d >= start && *d <= end)
                .collect();
            all.into_iter().collect()
        }
    };
    if dates.is_empty() {
        return Err(Error::NoOverlap {
            assets: series.iter().map(|s| s.asset_id.clone()).collect(),
        });
    }

    let mut columns = IndexMap::with_capacity(series.len());
    for s in series {
        let mut col = Vec::with_capacity(dates.len());
        let mut j = 0;
        for d in &dates {
            while j < s.observations.len() && s.observations[j].0 < *d {
                j += 1;
            }
            match s.observations.get(j) {
                Some((od, r)) if od == d => col.push(*r),
                _ => col.push(0.0),
            }
        }
        columns.insert(s.asset_id.clone(), col);
    }
    ReturnPanel::new(dates, columns)
}

/// Pre- and post-event sample bounds around an event date.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventWindow {
    pub event_date: TradingDate,
    pub pre_start: TradingDate,
    pub pre_end: TradingDate,
    pub post_start: TradingDate,
    pub post_end: TradingDate,
}

impl EventWindow {
    pub fn new(
        event_date: TradingDate,
        pre_start: TradingDate,
        pre_end: TradingDate,
        post_start: TradingDate,
        post_end: TradingDate,
    ) -> Result<Self> {
        let ok = pre_start < pre_end
            && pre_end < event_date
            && event_date <= post_start
            && post_start < post_end;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "event window must satisfy pre_start < pre_end < event <= post_start < post_end \
                 (got {pre_start}..{pre_end}, event {event_date}, {post_start}..{post_end})"
            )));
        }
        // event_date == post_start would put the event inside the post segment
        let post_start = if post_start == event_date {
            post_start.succ()
        } else {
            post_start
        };
        Ok(EventWindow {
            event_date,
            pre_start,
            pre_end,
            post_start,
            post_end,
        })
    }

    /// Window around the event with open-ended outer bounds.
    pub fn around(event_date: TradingDate) -> Self {
        EventWindow {
            event_date,
            pre_start: TradingDate::MIN,
            pre_end: event_date.pred(),
            post_start: event_date.succ(),
            post_end: TradingDate::MAX,
        }
    }

    pub fn in_pre(&self, d: TradingDate) -> bool {
        d >= self.pre_start && d <= self.pre_end && d != self.event_date
    }

    pub fn in_post(&self, d: TradingDate) -> bool {
        d >= self.post_start && d <= self.post_end && d != self.event_date
    }
}

/// Splits a panel into its pre-event and post-event rows.
pub fn segment(panel: &ReturnPanel, window: &EventWindow) -> Result<(ReturnPanel, ReturnPanel)> {
    let pre = panel.slice_dates(window.pre_start, window.pre_end.min(window.event_date.pred()));
    let post = panel.slice_dates(window.post_start.max(window.event_date.succ()), window.post_end);
    if pre.is_empty() {
        return Err(Error::InsufficientData(format!(
            "pre-event segment {}..{} has no rows",
            window.pre_start, window.pre_end
        )));
    }
    if post.is_empty() {
        return Err(Error::InsufficientData(format!(
            "post-event segment {}..{} has no rows",
            window.post_start, window.post_end
        )));
    }
    Ok((pre, post))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Pre,
    Post,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Segment::Pre => "pre",
            Segment::Post => "post",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescriptiveRow {
    pub asset_id: String,
    pub segment: Segment,
    pub n: usize,
    pub mean_price: f64,
    pub std_price: f64,
    pub mean_return: f64,
    pub std_return: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n-1 denominator.
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Per-asset, per-segment price and return moments on the panel's dates.
pub fn descriptive_stats(
    panel: &ReturnPanel,
    prices: &[PriceSeries],
    window: &EventWindow,
) -> Result<Vec<DescriptiveRow>> {
    let (pre, post) = segment(panel, window)?;
    let mut rows = Vec::new();
    for id in panel.asset_ids() {
        let ps = prices
            .iter()
            .find(|p| p.asset_id == id)
            .ok_or_else(|| Error::Lookup(id.to_string()))?;
        for (seg, part) in [(Segment::Pre, &pre), (Segment::Post, &post)] {
            if part.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "{id}: {seg} segment has {} rows, need 2",
                    part.len()
                )));
            }
            let px: Vec<f64> = part
                .dates()
                .iter()
                .map(|d| {
                    ps.price_at_or_before(*d).ok_or_else(|| {
                        Error::InvalidInput(format!("{id}: no price on panel date {d}"))
                    })
                })
                .collect::<Result<_>>()?;
            let rets = part.column(id)?;
            rows.push(DescriptiveRow {
                asset_id: id.to_string(),
                segment: seg,
                n: part.len(),
                mean_price: mean(&px),
                std_price: sample_std(&px),
                mean_return: mean(rets),
                std_return: sample_std(rets),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> TradingDate {
        s.parse().unwrap()
    }

    fn prices(id: &str, pts: &[(&str, f64)]) -> PriceSeries {
        PriceSeries::new(id, pts.iter().map(|(s, p)| (d(s), *p)).collect()).unwrap()
    }

    fn returns(id: &str, dates: &[&str]) -> ReturnSeries {
        ReturnSeries::new(
            id,
            dates
                .iter()
                .enumerate()
                .map(|(i, s)| (d(s), i as f64 * 0.01))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn flat_prices_give_zero_return() {
        let p = prices("A", &[("2024-01-01", 100.0), ("2024-01-02", 100.0)]);
        let r = compute_returns(&p, 0.0).unwrap();
        assert_eq!(r.observations(), &[(d("2024-01-02"), 0.0)]);
    }

    #[test]
    fn log_returns_by_hand() {
        let p = prices(
            "A",
            &[("2024-01-01", 100.0), ("2024-01-02", 110.0), ("2024-01-03", 99.0)],
        );
        let r = compute_returns(&p, 0.0).unwrap().values();
        assert!((r[0] - 0.0953101798).abs() < 1e-9);
        assert!((r[1] - (-0.1053605157)).abs() < 1e-9);
    }

    #[test]
    fn risk_free_is_subtracted() {
        let p = prices("A", &[("2024-01-01", 100.0), ("2024-01-02", 100.0)]);
        let r = compute_returns(&p, 0.0001).unwrap().values();
        assert_eq!(r, vec![-0.0001]);
        assert!(compute_returns(&p, -0.1).is_err());
    }

    #[test]
    fn bad_prices_rejected() {
        let bad = PriceSeries::new("A", vec![(d("2024-01-01"), 1.0), (d("2024-01-02"), 0.0)]);
        assert!(matches!(bad, Err(Error::InvalidInput(_))));
        let short = PriceSeries::new("A", vec![(d("2024-01-01"), 1.0)]);
        assert!(matches!(short, Err(Error::InsufficientData(_))));
        let unordered = PriceSeries::new("A", vec![(d("2024-01-02"), 1.0), (d("2024-01-01"), 2.0)]);
        assert!(unordered.is_err());
    }

    #[test]
    fn identical_dates_align_unchanged() {
        let a = returns("A", &["2024-01-01", "2024-01-02", "2024-01-03"]);
        let b = returns("B", &["2024-01-01", "2024-01-02", "2024-01-03"]);
        let p = align_panel(&[a.clone(), b]).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.column("A").unwrap(), a.values().as_slice());
    }

    #[test]
    fn weekends_dropped_against_weekday_calendar() {
        // 2024-01-08 is a Monday
        let week = [
            "2024-01-08", "2024-01-09", "2024-01-10", "2024-01-11", "2024-01-12", "2024-01-13",
            "2024-01-14",
        ];
        let btc = returns("BTC", &week);
        let spx = returns("SPX", &week[..5]);
        let p = align_panel(&[btc, spx]).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.dates().iter().all(|d| d.weekday().number_from_monday() <= 5));
        assert_eq!(p.column("BTC").unwrap()[4], 0.04);
    }

    #[test]
    fn three_way_alignment_matches_join_oracle() {
        let a = returns("A", &["2024-01-01", "2024-01-02", "2024-01-03", "2024-01-05", "2024-01-06", "2024-01-08"]);
        let b = returns("B", &["2024-01-02", "2024-01-03", "2024-01-04", "2024-01-05", "2024-01-08"]);
        let c = returns("C", &["2024-01-01", "2024-01-02", "2024-01-03", "2024-01-05", "2024-01-07", "2024-01-08"]);
        let all = [a, b, c];
        let p = align_panel(&all).unwrap();

        // nested-loop join
        let mut expect = Vec::new();
        for (da, _) in all[0].observations() {
            let in_b = all[1].observations().iter().any(|(x, _)| x == da);
            let in_c = all[2].observations().iter().any(|(x, _)| x == da);
            if in_b && in_c {
                expect.push(*da);
            }
        }
        assert_eq!(expect.len(), 4);
        assert_eq!(p.dates(), expect.as_slice());
        for s in &all {
            for (i, date) in p.dates().iter().enumerate() {
                let v = s.observations().iter().find(|(x, _)| x == date).unwrap().1;
                assert_eq!(p.column(s.asset_id()).unwrap()[i], v);
            }
        }
    }

    #[test]
    fn disjoint_dates_name_assets() {
        let a = returns("A", &["2024-01-01"]);
        let b = returns("B", &["2024-01-02"]);
        match align_panel(&[a, b]) {
            Err(Error::NoOverlap { assets }) => assert_eq!(assets, vec!["A", "B"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forward_fill_zero_fills_missing_days() {
        let a = returns("A", &["2024-01-01", "2024-01-02", "2024-01-03"]);
        let b = returns("B", &["2024-01-01", "2024-01-03"]);
        let p = align_panel_with(&[a, b], AlignPolicy::ForwardFill).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.column("B").unwrap(), &[0.0, 0.0, 0.01]);
    }

    fn daily_panel(n: usize) -> ReturnPanel {
        let start = d("2024-01-01");
        let mut dates = Vec::new();
        let mut cur = start;
        for _ in 0..n {
            dates.push(cur);
            cur = cur.succ();
        }
        let mut cols = IndexMap::new();
        cols.insert("A".to_string(), (0..n).map(|i| i as f64).collect());
        ReturnPanel::new(dates, cols).unwrap()
    }

    #[test]
    fn segment_partitions_around_event() {
        let p = daily_panel(11);
        let w = EventWindow::new(d("2024-01-06"), d("2024-01-01"), d("2024-01-05"), d("2024-01-07"), d("2024-01-11")).unwrap();
        let (pre, post) = segment(&p, &w).unwrap();
        assert_eq!(pre.len() + post.len(), 10);
        assert!(!pre.dates().contains(&w.event_date));
        assert!(!post.dates().contains(&w.event_date));
    }

    #[test]
    fn event_on_post_start_is_excluded() {
        let p = daily_panel(11);
        let w = EventWindow::new(d("2024-01-06"), d("2024-01-01"), d("2024-01-05"), d("2024-01-06"), d("2024-01-11")).unwrap();
        let (_, post) = segment(&p, &w).unwrap();
        assert_eq!(post.dates()[0], d("2024-01-07"));
    }

    #[test]
    fn empty_post_segment_errors() {
        let p = daily_panel(1);
        let w = EventWindow::new(d("2024-01-03"), d("2023-12-01"), d("2024-01-02"), d("2024-01-04"), d("2024-01-30")).unwrap();
        assert!(matches!(segment(&p, &w), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn window_order_enforced() {
        assert!(EventWindow::new(d("2024-01-06"), d("2024-01-05"), d("2024-01-01"), d("2024-01-07"), d("2024-01-11")).is_err());
        assert!(EventWindow::new(d("2024-01-06"), d("2024-01-01"), d("2024-01-06"), d("2024-01-07"), d("2024-01-11")).is_err());
    }

    #[test]
    fn textbook_sample_std() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[1.0, 2.0, 3.0]), 1.0);
    }

    #[test]
    fn constant_prices_have_zero_spread() {
        let n = 12;
        let mut pts = Vec::new();
        let mut cur = d("2024-01-01");
        for _ in 0..n {
            pts.push((cur, 50.0));
            cur = cur.succ();
        }
        let a = PriceSeries::new("A", pts.clone()).unwrap();
        let b = PriceSeries::new("B", pts).unwrap();
        let ra = compute_returns(&a, 0.0).unwrap();
        let rb = compute_returns(&b, 0.0).unwrap();
        let panel = align_panel(&[ra, rb]).unwrap();
        let w = EventWindow::new(d("2024-01-06"), d("2024-01-01"), d("2024-01-05"), d("2024-01-07"), d("2024-01-12")).unwrap();
        let rows = descriptive_stats(&panel, &[a, b], &w).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!(r.mean_price, 50.0);
            assert_eq!(r.std_price, 0.0);
            assert_eq!(r.mean_return, 0.0);
            assert_eq!(r.std_return, 0.0);
        }
    }

    proptest! {
        #[test]
        fn cumulative_returns_recover_prices(steps in prop::collection::vec(-0.2f64..0.2, 1..200), p0 in 1.0f64..1e5) {
            let mut pts = Vec::new();
            let mut cur = d("2020-01-01");
            let mut p = p0;
            pts.push((cur, p));
            for s in &steps {
                p *= s.exp();
                cur = cur.succ();
                pts.push((cur, p));
            }
            let series = PriceSeries::new("A", pts.clone()).unwrap();
            let r = compute_returns(&series, 0.0).unwrap();
            let mut acc = 0.0;
            for (i, (_, ret)) in r.observations().iter().enumerate() {
                acc += ret;
                let rebuilt = p0 * acc.exp();
                let truth = pts[i + 1].1;
                prop_assert!(((rebuilt - truth) / truth).abs() < 1e-12);
            }
        }

        #[test]
        fn alignment_is_subset_and_fixed_point(
            ma in prop::collection::vec(any::<bool>(), 30),
            mb in prop::collection::vec(any::<bool>(), 30),
        ) {
            let base = d("2024-01-01");
            let mk = |id: &str, mask: &[bool]| {
                let mut obs = Vec::new();
                let mut cur = base;
                for (i, keep) in mask.iter().enumerate() {
                    if *keep { obs.push((cur, i as f64)); }
                    cur = cur.succ();
                }
                ReturnSeries::new(id, obs).unwrap()
            };
            let a = mk("A", &ma);
            let b = mk("B", &mb);
            prop_assume!(!a.is_empty() && !b.is_empty());
            match align_panel(&[a.clone(), b.clone()]) {
                Ok(p) => {
                    for dt in p.dates() {
                        prop_assert!(a.dates().contains(dt) && b.dates().contains(dt));
                    }
                    let again = align_panel(&[p.series("A").unwrap(), p.series("B").unwrap()]).unwrap();
                    prop_assert_eq!(again, p);
                }
                Err(Error::NoOverlap { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn segments_disjoint_subsets(n in 5usize..60, split in 1usize..4) {
            let p = daily_panel(n);
            let ev = p.dates()[n / 2];
            let w = EventWindow::around(ev);
            let _ = split;
            if let Ok((pre, post)) = segment(&p, &w) {
                prop_assert!(pre.dates().iter().all(|x| p.dates().contains(x) && !post.dates().contains(x)));
                prop_assert!(pre.len() + post.len() == n - 1);
            }
        }

        #[test]
        fn stats_are_order_free(xs in prop::collection::vec(-1e3f64..1e3, 2..50), seed in any::<u64>()) {
            let mut ys = xs.clone();
            // deterministic shuffle
            let mut s = seed | 1;
            for i in (1..ys.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                ys.swap(i, (s % (i as u64 + 1)) as usize);
            }
            prop_assert!((mean(&xs) - mean(&ys)).abs() <= 1e-9 * (1.0 + mean(&xs).abs()));
            prop_assert!((sample_std(&xs) - sample_std(&ys)).abs() <= 1e-9 * (1.0 + sample_std(&xs)));
        }
    }
}
