//! Price CSV parsing and run configuration.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garch::GarchSpec;
use crate::rolling::MIN_WINDOW;
use crate::series::{AlignPolicy, EventWindow, PriceSeries, TradingDate};

const NUMERIC_COLUMNS: [&str; 6] = ["open", "high", "low", "close", "adj close", "volume"];

/// Which column supplies the price.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PriceField {
    /// `Adj Close` when the file has it, otherwise `Close`.
    #[default]
    AdjustedClose,
    Close,
}

/// Reads a Yahoo-style daily price file, preferring `Adj Close`.
pub fn parse_price_csv(path: &Path, asset_id: &str) -> Result<PriceSeries> {
    parse_price_csv_with(path, asset_id, PriceField::AdjustedClose)
}

pub fn parse_price_csv_with(path: &Path, asset_id: &str, field: PriceField) -> Result<PriceSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_price_text(&text, path, asset_id, field)
}

/// Parses CSV text; `path` only labels errors.
pub fn parse_price_text(text: &str, path: &Path, asset_id: &str, field: PriceField) -> Result<PriceSeries> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if text.trim().is_empty() {
        return Err(Error::InsufficientData(format!("{} is empty", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let date_col = find("date").ok_or_else(|| parse_err(1, "missing Date column".into()))?;
    let close_col = find("close").ok_or_else(|| parse_err(1, "missing Close column".into()))?;
    let price_col = match field {
        PriceField::AdjustedClose => find("adj close").unwrap_or(close_col),
        PriceField::Close => close_col,
    };
    let numeric: Vec<usize> = NUMERIC_COLUMNS.iter().filter_map(|c| find(c)).collect();

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut skipped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cell = |i: usize| record.get(i).unwrap_or("");
        if numeric.iter().any(|&i| {
            let v = cell(i);
            v.is_empty() || v.eq_ignore_ascii_case("null")
        }) {
            log::warn!("{}:{line}: empty numeric cell, row skipped", path.display());
            skipped += 1;
            continue;
        }
        let date: TradingDate = cell(date_col)
            .parse()
            .map_err(|_| parse_err(line, format!("malformed date '{}'", cell(date_col))))?;
        let raw = cell(price_col);
        let price: f64 = raw
            .parse()
            .map_err(|_| parse_err(line, format!("non-numeric price '{raw}'")))?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(parse_err(line, format!("price must be positive, got {raw}")));
        }
        if !seen.insert(date) {
            return Err(Error::Integrity {
                path: path.to_path_buf(),
                message: format!("duplicate date {date} at line {line}"),
            });
        }
        rows.push((date, price));
    }
    if skipped > 0 {
        log::info!("{}: skipped {skipped} incomplete rows", path.display());
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} has {} usable rows, need at least 2",
            path.display(),
            rows.len()
        )));
    }
    rows.sort_by_key(|r| r.0);
    PriceSeries::new(asset_id, rows)
}

/// Writes `Date,Close` rows that [`parse_price_csv`] reads back exactly.
pub fn write_price_csv(path: &Path, series: &PriceSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["Date", "Close"]).map_err(io)?;
    for (d, p) in series.observations() {
        w.write_record([d.to_string(), p.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetRole {
    Crypto,
    EquityIndex,
    Commodity,
    FxIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssetSpec {
    pub id: String,
    pub name: String,
    /// Resolved against the config file's directory.
    pub csv: PathBuf,
    pub role: AssetRole,
    /// Per-asset model orders, when they differ from the run default.
    pub model: Option<GarchSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub assets: Vec<AssetSpec>,
    pub base_asset_id: String,
    pub event: EventWindow,
    pub windows: Vec<usize>,
    pub risk_free_daily: f64,
    pub align: AlignPolicy,
    pub use_adjusted_close: bool,
    pub adf_max_lags: Option<usize>,
    pub chow_trend: bool,
    pub model: GarchSpec,
    pub smoothing_halfwidth: usize,
    pub dcc_pairwise: bool,
    pub output_dir: PathBuf,
    /// Keys that were absent and took their default value.
    pub defaults_applied: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn asset(&self, id: &str) -> Result<&AssetSpec> {
        self.assets
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn spec_for(&self, id: &str) -> GarchSpec {
        self.asset(id).ok().and_then(|a| a.model).unwrap_or(self.model)
    }

    pub fn other_asset_ids(&self) -> Vec<&str> {
        self.assets
            .iter()
            .map(|a| a.id.as_str())
            .filter(|id| *id != self.base_asset_id)
            .collect()
    }

    pub fn price_field(&self) -> PriceField {
        if self.use_adjusted_close {
            PriceField::AdjustedClose
        } else {
            PriceField::Close
        }
    }
}

#[derive(Deserialize)]
struct RawConfig {
    assets: Option<Vec<RawAsset>>,
    event: Option<RawEvent>,
    #[serde(default)]
    analysis: RawAnalysis,
    #[serde(default)]
    models: RawModels,
    #[serde(default)]
    dcc: RawDcc,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
struct RawAsset {
    id: String,
    name: Option<String>,
    csv: String,
    role: AssetRole,
    #[serde(flatten)]
    models: RawModels,
}

#[derive(Deserialize)]
struct RawEvent {
    date: Option<TradingDate>,
    pre_start: Option<TradingDate>,
    pre_end: Option<TradingDate>,
    post_start: Option<TradingDate>,
    post_end: Option<TradingDate>,
}

#[derive(Default, Deserialize)]
struct RawAnalysis {
    windows: Option<Vec<usize>>,
    risk_free_daily: Option<f64>,
    base_asset: Option<String>,
    forward_fill: Option<bool>,
    use_adjusted_close: Option<bool>,
    adf_max_lags: Option<usize>,
    chow_trend: Option<bool>,
}

#[derive(Default, Deserialize)]
struct RawModels {
    garch_p: Option<usize>,
    garch_q: Option<usize>,
    arma_ar: Option<usize>,
    arma_ma: Option<usize>,
}

impl RawModels {
    fn is_empty(&self) -> bool {
        self.garch_p.is_none() && self.garch_q.is_none() && self.arma_ar.is_none() && self.arma_ma.is_none()
    }
}

#[derive(Default, Deserialize)]
struct RawDcc {
    smoothing_halfwidth: Option<usize>,
    pairwise: Option<bool>,
}

#[derive(Default, Deserialize)]
struct RawOutput {
    dir: Option<String>,
}

const MODEL_KEYS: [&str; 4] = ["garch_p", "garch_q", "arma_ar", "arma_ma"];

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "" => &["assets", "event", "analysis", "models", "dcc", "output"],
        "assets" => &["id", "name", "csv", "role", "garch_p", "garch_q", "arma_ar", "arma_ma"],
        "event" => &["date", "pre_start", "pre_end", "post_start", "post_end"],
        "analysis" => &[
            "windows",
            "risk_free_daily",
            "base_asset",
            "forward_fill",
            "use_adjusted_close",
            "adf_max_lags",
            "chow_trend",
        ],
        "models" => &MODEL_KEYS,
        "dcc" => &["smoothing_halfwidth", "pairwise"],
        "output" => &["dir"],
        _ => &[],
    }
}

fn unknown_keys(doc: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |section: &str, table: &toml::Table| {
        for k in table.keys() {
            if !known_keys(section).contains(&k.as_str()) {
                out.push(if section.is_empty() { k.clone() } else { format!("{section}.{k}") });
            }
        }
    };
    check("", doc);
    for (section, value) in doc {
        match value {
            toml::Value::Table(t) => check(section, t),
            toml::Value::Array(items) => {
                for t in items.iter().filter_map(|v| v.as_table()) {
                    check(section, t);
                }
            }
            _ => {}
        }
    }
    out
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    parse_config(&text, dir).map_err(|e| e.context(format!("loading {}", path.display())))
}

fn model_spec(raw: &RawModels, base: GarchSpec) -> Result<GarchSpec> {
    GarchSpec::new(
        raw.arma_ar.unwrap_or(base.ar),
        raw.arma_ma.unwrap_or(base.ma),
        raw.garch_p.unwrap_or(base.p),
        raw.garch_q.unwrap_or(base.q),
    )
    .map_err(|e| Error::Config(e.to_string()))
}

/// Parses config text; relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut warnings = Vec::new();
    for key in unknown_keys(&doc) {
        log::warn!("unknown config key '{key}' ignored");
        warnings.push(format!("unknown config key '{key}' ignored"));
    }
    let raw: RawConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut defaults = Vec::new();
    let mut default = |key: &str, value: String| defaults.push(format!("{key} = {value}"));

    let raw_assets = raw.assets.ok_or_else(|| Error::Config("missing required key 'assets'".into()))?;
    if raw_assets.len() < 2 {
        return Err(Error::Config("at least two assets are required".into()));
    }

    let model = model_spec(&raw.models, GarchSpec::default())?;
    for (key, set) in MODEL_KEYS.iter().zip([
        raw.models.garch_p,
        raw.models.garch_q,
        raw.models.arma_ar,
        raw.models.arma_ma,
    ]) {
        if set.is_none() {
            default(&format!("models.{key}"), "1".into());
        }
    }

    let mut seen = HashSet::new();
    let mut assets = Vec::new();
    for a in raw_assets {
        if a.id.is_empty() {
            return Err(Error::Config("asset id must not be empty".into()));
        }
        if !seen.insert(a.id.clone()) {
            return Err(Error::Config(format!("duplicate asset id '{}'", a.id)));
        }
        if a.csv.is_empty() {
            return Err(Error::Config(format!("asset '{}' has an empty csv path", a.id)));
        }
        let spec = if a.models.is_empty() { None } else { Some(model_spec(&a.models, model)?) };
        assets.push(AssetSpec {
            name: a.name.unwrap_or_else(|| a.id.clone()),
            csv: base_dir.join(&a.csv),
            id: a.id,
            role: a.role,
            model: spec,
        });
    }

    let ev = raw.event.ok_or_else(|| Error::Config("missing required key 'event.date'".into()))?;
    let date = ev.date.ok_or_else(|| Error::Config("missing required key 'event.date'".into()))?;
    let open = EventWindow::around(date);
    let mut bound = |key: &str, v: Option<TradingDate>, fallback: TradingDate| {
        v.unwrap_or_else(|| {
            default(&format!("event.{key}"), "open".into());
            fallback
        })
    };
    let event = EventWindow::new(
        date,
        bound("pre_start", ev.pre_start, open.pre_start),
        bound("pre_end", ev.pre_end, open.pre_end),
        bound("post_start", ev.post_start, open.post_start),
        bound("post_end", ev.post_end, open.post_end),
    )
    .map_err(|e| Error::Config(e.to_string()))?;

    let an = raw.analysis;
    let windows = an.windows.unwrap_or_else(|| {
        default("analysis.windows", "[30, 60]".into());
        vec![30, 60]
    });
    if windows.is_empty() {
        return Err(Error::Config("analysis.windows must not be empty".into()));
    }
    if let Some(w) = windows.iter().find(|w| **w < MIN_WINDOW) {
        return Err(Error::Config(format!("rolling window {w} is below the minimum of {MIN_WINDOW}")));
    }
    let risk_free_daily = an.risk_free_daily.unwrap_or_else(|| {
        default("analysis.risk_free_daily", "0".into());
        0.0
    });
    if !risk_free_daily.is_finite() {
        return Err(Error::Config("analysis.risk_free_daily must be finite".into()));
    }
    let base_asset_id = match an.base_asset {
        Some(b) => b,
        None => {
            let b = assets
                .iter()
                .find(|a| a.role == AssetRole::Crypto)
                .unwrap_or(&assets[0])
                .id
                .clone();
            default("analysis.base_asset", b.clone());
            b
        }
    };
    if !assets.iter().any(|a| a.id == base_asset_id) {
        return Err(Error::Config(format!("base asset '{base_asset_id}' is not in the asset list")));
    }
    let align = match an.forward_fill {
        Some(true) => AlignPolicy::ForwardFill,
        Some(false) => AlignPolicy::Intersection,
        None => {
            default("analysis.forward_fill", "false".into());
            AlignPolicy::Intersection
        }
    };
    let use_adjusted_close = an.use_adjusted_close.unwrap_or_else(|| {
        default("analysis.use_adjusted_close", "true".into());
        true
    });
    if an.adf_max_lags.is_none() {
        default("analysis.adf_max_lags", "floor(12 (n/100)^0.25)".into());
    }
    let chow_trend = an.chow_trend.unwrap_or_else(|| {
        default("analysis.chow_trend", "false".into());
        false
    });
    let smoothing_halfwidth = raw.dcc.smoothing_halfwidth.unwrap_or_else(|| {
        default("dcc.smoothing_halfwidth", crate::dcc::DEFAULT_SMOOTHING_HALFWIDTH.to_string());
        crate::dcc::DEFAULT_SMOOTHING_HALFWIDTH
    });
    let dcc_pairwise = raw.dcc.pairwise.unwrap_or_else(|| {
        default("dcc.pairwise", "false".into());
        false
    });
    let output_dir = base_dir.join(raw.output.dir.unwrap_or_else(|| {
        default("output.dir", "out".into());
        "out".into()
    }));

    Ok(RunConfig {
        assets,
        base_asset_id,
        event,
        windows,
        risk_free_daily,
        align,
        use_adjusted_close,
        adf_max_lags: an.adf_max_lags,
        chow_trend,
        model,
        smoothing_halfwidth,
        dcc_pairwise,
        output_dir,
        defaults_applied: defaults,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<PriceSeries> {
        parse_price_text(text, Path::new("t.csv"), "X", PriceField::AdjustedClose)
    }

    const HEADER: &str = "Date,Open,High,Low,Close,Adj Close,Volume\n";

    #[test]
    fn happy_path_prefers_adjusted() {
        let s = parse(&format!(
            "{HEADER}2024-01-02,1,1,1,10.5,10.0,100\n2024-01-03,1,1,1,11.5,11.0,100\n2024-01-04,1,1,1,12.5,12.0,100\n"
        ))
        .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.observations()[2].1, 12.0);
        let close = parse_price_text(
            &format!("{HEADER}2024-01-02,1,1,1,10.5,10.0,100\n2024-01-03,1,1,1,11.5,11.0,100\n"),
            Path::new("t.csv"),
            "X",
            PriceField::Close,
        )
        .unwrap();
        assert_eq!(close.observations()[0].1, 10.5);
    }

    #[test]
    fn headers_case_insensitive_and_adj_optional() {
        let s = parse("date,CLOSE\n2024-01-02,3\n2024-01-03,4\n").unwrap();
        assert_eq!(s.observations()[1].1, 4.0);
    }

    #[test]
    fn sorted_output() {
        let s = parse("Date,Close\n2024-01-05,3\n2024-01-02,1\n2024-01-03,2\n").unwrap();
        let dates: Vec<String> = s.dates().map(|d| d.to_string()).collect();
        assert_eq!(dates, ["2024-01-02", "2024-01-03", "2024-01-05"]);
    }

    #[test]
    fn negative_price_reports_line() {
        let err = parse("Date,Close\n2024-01-02,3\n2024-01-03,-5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(parse("Date,Close\n2024-13-02,3\n2024-01-03,5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("Date,Close\n2024-01-02,abc\n2024-01-03,5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("Date,Open\n2024-01-02,3\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicates_and_empty() {
        assert!(matches!(parse("Date,Close\n2024-01-02,3\n2024-01-02,4\n"), Err(Error::Integrity { .. })));
        assert!(matches!(parse(""), Err(Error::InsufficientData(_))));
        assert!(matches!(parse("Date,Close\n"), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn null_rows_skipped() {
        let s = parse(&format!(
            "{HEADER}2024-01-02,1,1,1,10,10,5\n2024-01-03,null,null,null,null,null,null\n2024-01-04,1,1,1,12,12,\n2024-01-05,1,1,1,13,13,7\n"
        ))
        .unwrap();
        assert_eq!(s.len(), 2);
    }

    const MINIMAL: &str = r#"
[[assets]]
id = "BTC"
csv = "btc.csv"
role = "crypto"

[[assets]]
id = "SPX"
name = "S&P 500"
csv = "spx.csv"
role = "equity_index"

[event]
date = "2024-01-10"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL, Path::new("/cfg")).unwrap();
        assert_eq!(c.windows, vec![30, 60]);
        assert_eq!(c.risk_free_daily, 0.0);
        assert_eq!(c.model, GarchSpec { ar: 1, ma: 1, p: 1, q: 1 });
        assert_eq!(c.base_asset_id, "BTC");
        assert_eq!(c.smoothing_halfwidth, 5);
        assert_eq!(c.assets[0].csv, Path::new("/cfg/btc.csv"));
        assert_eq!(c.assets[0].name, "BTC");
        assert!(c.defaults_applied.iter().any(|d| d.starts_with("analysis.windows")));
        assert!(c.defaults_applied.iter().any(|d| d.starts_with("dcc.smoothing_halfwidth")));
        assert_eq!(c, parse_config(MINIMAL, Path::new("/cfg")).unwrap());
    }

    #[test]
    fn config_rejections() {
        let bad_window = format!("{MINIMAL}\n[analysis]\nwindows = [2, 30]\n");
        assert!(matches!(parse_config(&bad_window, Path::new(".")), Err(Error::Config(_))));
        let bad_base = format!("{MINIMAL}\n[analysis]\nbase_asset = \"ETH\"\n");
        assert!(matches!(parse_config(&bad_base, Path::new(".")), Err(Error::Config(_))));
        let no_event = MINIMAL.replace("[event]\ndate = \"2024-01-10\"", "");
        assert!(matches!(parse_config(&no_event, Path::new(".")), Err(Error::Config(_))));
        assert!(matches!(parse_config("[event]\ndate = \"2024-01-10\"\n", Path::new(".")), Err(Error::Config(_))));
        let bad_order = format!("{MINIMAL}\n[models]\ngarch_p = 0\n");
        assert!(matches!(parse_config(&bad_order, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_warn() {
        let text = format!("{MINIMAL}\nsurprise = 1\n[dcc]\nsmoothing_halfwidth = 3\nkernel = \"gauss\"\n");
        let c = parse_config(&text, Path::new(".")).unwrap();
        assert_eq!(c.smoothing_halfwidth, 3);
        assert_eq!(c.warnings.len(), 2);
    }

    #[test]
    fn replication_style_config() {
        let text = r#"
[[assets]]
id = "BTC"
csv = "BTC-USD.csv"
role = "crypto"
garch_p = 2
garch_q = 2
[[assets]]
id = "GOLD"
csv = "GC=F.csv"
role = "commodity"
[event]
date = "2024-01-10"
pre_start = "2023-10-01"
pre_end = "2024-01-09"
post_start = "2024-01-11"
post_end = "2024-04-30"
"#;
        let c = parse_config(text, Path::new(".")).unwrap();
        assert_eq!(c.spec_for("BTC"), GarchSpec { ar: 1, ma: 1, p: 2, q: 2 });
        assert_eq!(c.spec_for("GOLD"), GarchSpec::default());
        assert_eq!(c.event.pre_start.to_string(), "2023-10-01");
        assert_eq!(c.event.post_end.to_string(), "2024-04-30");
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(prices in prop::collection::vec(1e-3f64..1e6, 2..60), start in 0i64..3000) {
            let d0 = chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Duration::days(start);
            let mut d: TradingDate = d0.format("%Y-%m-%d").to_string().parse().unwrap();
            let mut obs = Vec::new();
            for p in prices {
                obs.push((d, p));
                d = d.succ();
            }
            let series = PriceSeries::new("X", obs).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("x.csv");
            write_price_csv(&path, &series).unwrap();
            let back = parse_price_csv(&path, "X").unwrap();
            prop_assert_eq!(back, series);
        }
    }
}
