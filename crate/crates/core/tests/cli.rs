use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use corrbreak::ingest::{parse_price_csv, write_price_csv};

const BIN: &str = env!("CARGO_BIN_EXE_corrbreak");

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture_config() -> PathBuf {
    fixture_dir().join("config.toml")
}

fn corrbreak(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN)
        .args(args)
        .env("CORRBREAK_LOG", "quiet")
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    listing(dir)
        .into_iter()
        .map(|n| {
            let bytes = fs::read(dir.join(&n)).unwrap();
            (n, bytes)
        })
        .collect()
}

/// Copies the fixture into a scratch directory so it can be altered.
fn scratch_fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["config.toml", "BTC.csv", "SPX.csv", "GOLD.csv", "DXY.csv"] {
        fs::copy(fixture_dir().join(name), dir.path().join(name)).unwrap();
    }
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_run_writes_every_output() {
    let out = tempfile::tempdir().unwrap();
    let (code, msg) = corrbreak(&["run", "--config", s(&fixture_config()), "--out", s(out.path())]);
    assert_eq!(code, 0, "{msg}");
    let files = listing(out.path());
    for must in [
        "table1_adf.csv",
        "table2_descriptive.csv",
        "table3_chow_pairwise.csv",
        "table4_chow_rolling.csv",
        "table5_garch.csv",
        "manifest.json",
        "report.txt",
    ] {
        assert!(files.contains(&must.to_string()), "missing {must}");
    }
    for prefix in ["fig1_", "fig2_", "fig3_"] {
        assert!(files.iter().any(|f| f.starts_with(prefix)), "no {prefix} files");
    }
    assert!(files.len() >= 13);
    let report = fs::read_to_string(out.path().join("report.txt")).unwrap();
    for t in 1..=5 {
        assert!(report.contains(&format!("Table {t}.")), "report lacks Table {t}");
    }
    assert!(!report.contains("stage skipped"));
    // no staging directory left behind
    assert!(listing(out.path().parent().unwrap()).iter().all(|n| !n.contains(".staging-")));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(corrbreak(&["--help"]).0, 0);
    let (code, text) = corrbreak(&["--version"]);
    assert_eq!(code, 0);
    assert!(text.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(corrbreak(&["stage", "volatility", "--config", s(&fixture_config())]).0, 64);
    assert_eq!(corrbreak(&["run"]).0, 64);
    assert_eq!(corrbreak(&["frobnicate"]).0, 64);
    assert_eq!(corrbreak(&[]).0, 64);
}

#[test]
fn fatal_errors_exit_1_without_outputs() {
    let missing = corrbreak(&["run", "--config", "/nonexistent/config.toml", "--out", "/tmp/never"]);
    assert_eq!(missing.0, 1);
    assert!(!Path::new("/tmp/never").exists());

    let fx = scratch_fixture();
    fs::write(fx.path().join("GOLD.csv"), "Date,Close\n2024-01-02,abc\n").unwrap();
    let out = fx.path().join("out");
    let (code, msg) = corrbreak(&["run", "--config", s(&fx.path().join("config.toml")), "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(msg.contains("GOLD.csv:2"), "{msg}");
    assert!(!out.exists());

    fs::remove_file(fx.path().join("GOLD.csv")).unwrap();
    let (code, _) = corrbreak(&["run", "--config", s(&fx.path().join("config.toml")), "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(!out.exists());
}

#[test]
fn short_span_is_partial_success() {
    // too few analysis dates for a GARCH fit: ADF, rolling and Chow still run
    let fx = scratch_fixture();
    let cfg = fx.path().join("config.toml");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("pre_start = \"2023-10-01\"", "pre_start = \"2023-12-11\"")
        .replace("post_end = \"2024-04-30\"", "post_end = \"2024-02-09\"");
    fs::write(&cfg, text).unwrap();
    let out = fx.path().join("out");
    let (code, msg) = corrbreak(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 2, "{msg}");
    let files = listing(&out);
    assert!(files.contains(&"table1_adf.csv".to_string()));
    assert!(files.contains(&"table3_chow_pairwise.csv".to_string()));
    assert!(!files.contains(&"table5_garch.csv".to_string()));
    assert!(!files.iter().any(|f| f.starts_with("fig3_")));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("[stage skipped: "));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["stages"]["garch"]["status"]["skipped"].is_string());
}

#[test]
fn stage_isolation() {
    let out = tempfile::tempdir().unwrap();
    let (code, msg) = corrbreak(&["stage", "adf", "--config", s(&fixture_config()), "--out", s(out.path())]);
    assert_eq!(code, 0, "{msg}");
    assert_eq!(listing(out.path()), vec!["table1_adf.csv"]);

    let out = tempfile::tempdir().unwrap();
    let (code, msg) = corrbreak(&["stage", "dcc", "--config", s(&fixture_config()), "--out", s(out.path())]);
    assert_eq!(code, 0, "{msg}");
    let files = listing(out.path());
    assert_eq!(files, vec!["fig3_BTC_DXY.csv", "fig3_BTC_GOLD.csv", "fig3_BTC_SPX.csv"]);

    let out = tempfile::tempdir().unwrap();
    corrbreak(&["stage", "chow", "--config", s(&fixture_config()), "--out", s(out.path())]);
    let files = listing(out.path());
    assert!(files.contains(&"table3_chow_pairwise.csv".to_string()));
    assert!(files.contains(&"table4_chow_rolling.csv".to_string()));
    assert!(!files.iter().any(|f| f.starts_with("fig1_")));

    let out = tempfile::tempdir().unwrap();
    corrbreak(&["stage", "roll", "--config", s(&fixture_config()), "--out", s(out.path())]);
    assert!(listing(out.path()).iter().all(|f| f.starts_with("fig1_")));

    let out = tempfile::tempdir().unwrap();
    corrbreak(&["stage", "garch", "--config", s(&fixture_config()), "--out", s(out.path())]);
    assert_eq!(listing(out.path()), vec!["table5_garch.csv"]);
}

#[test]
fn stage_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let (code, _) = corrbreak(&["stage", "dcc", "--config", s(&fixture_config()), "--out", s(dir.path())]);
        assert_eq!(code, 0);
    }
    assert_eq!(contents(a.path()), contents(b.path()));
}

#[test]
fn full_runs_are_deterministic_apart_from_timings() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(corrbreak(&["run", "--config", s(&fixture_config()), "--out", s(dir.path())]).0, 0);
    }
    let (mut ca, mut cb) = (contents(a.path()), contents(b.path()));
    let strip = |m: &mut BTreeMap<String, Vec<u8>>| {
        let mut v: serde_json::Value = serde_json::from_slice(&m.remove("manifest.json").unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timings_ms");
        v
    };
    assert_eq!(strip(&mut ca), strip(&mut cb));
    assert_eq!(ca, cb);
}

/// Every decimal figure in the report is a rounded CSV value.
#[test]
fn report_is_a_view_of_the_csvs() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(corrbreak(&["run", "--config", s(&fixture_config()), "--out", s(out.path())]).0, 0);
    let mut values = Vec::new();
    for name in listing(out.path()).iter().filter(|n| n.ends_with(".csv")) {
        let text = fs::read_to_string(out.path().join(name)).unwrap();
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            values.extend(line.split(',').filter_map(|c| c.parse::<f64>().ok()));
        }
    }
    let report = fs::read_to_string(out.path().join("report.txt")).unwrap();
    let mut checked = 0;
    for token in report.split(|c: char| c.is_whitespace() || c == '*') {
        let Some((_, frac)) = token.split_once('.').filter(|(_, f)| !f.is_empty()) else { continue };
        let Ok(shown) = token.parse::<f64>() else { continue };
        let places = frac.len();
        let found = values.iter().any(|v| {
            let r = format!("{v:.places$}");
            r == token || (shown == 0.0 && r.trim_start_matches('-') == token)
        });
        assert!(found, "report value {token} has no CSV source");
        checked += 1;
    }
    assert!(checked > 60, "only {checked} numbers checked");
}

#[test]
fn fixture_prices_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["BTC", "DXY"] {
        let original = parse_price_csv(&fixture_dir().join(format!("{id}.csv")), id).unwrap();
        let path = dir.path().join("copy.csv");
        write_price_csv(&path, &original).unwrap();
        assert_eq!(parse_price_csv(&path, id).unwrap(), original);
    }
}

#[test]
fn replication_config_loads() {
    use corrbreak::ingest::load_config;
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/etf_2024.toml");
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.assets.len(), 4);
    assert_eq!(cfg.base_asset_id, "BTC");
    assert_eq!(cfg.event.event_date.to_string(), "2024-01-10");
    assert_eq!(cfg.event.pre_start.to_string(), "2023-10-01");
    assert_eq!(cfg.event.pre_end.to_string(), "2024-01-09");
    assert_eq!(cfg.event.post_start.to_string(), "2024-01-11");
    assert_eq!(cfg.event.post_end.to_string(), "2024-04-30");
    assert_eq!(cfg.windows, vec![30, 60]);
    let btc = cfg.spec_for("BTC");
    assert_eq!((btc.ar, btc.ma, btc.p, btc.q), (1, 1, 2, 2));
    let spx = cfg.spec_for("SPX");
    assert_eq!((spx.p, spx.q), (1, 1));
    assert!(cfg.warnings.is_empty(), "{:?}", cfg.warnings);
}
