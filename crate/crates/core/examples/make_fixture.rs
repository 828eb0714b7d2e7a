//! Writes the bundled synthetic four-asset fixture.
//!
//! BTC trades every calendar day; SPX, GOLD and DXY trade on weekdays. Each
//! asset follows a GARCH(1,1) with Gaussian shocks, and the correlation of
//! each shock with BTC's shifts on 2024-01-10:
//!
//! | pair     | before | after |
//! |----------|--------|-------|
//! | BTC-SPX  | 0.05   | 0.55  |
//! | BTC-GOLD | 0.30   | 0.00  |
//! | BTC-DXY  | -0.30  | -0.05 |
//!
//! Weekend BTC prices wander but return to the path that fixes the
//! Friday-to-Monday move, so the aligned weekday returns are exactly the
//! simulated ones.
//!
//! ```text
//! cargo run --example make_fixture [-- <dir>]
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Asset {
    id: &'static str,
    start_price: f64,
    /// daily drift in percent
    drift: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
    corr_before: f64,
    corr_after: f64,
}

const ASSETS: [Asset; 4] = [
    Asset { id: "BTC", drift: 0.12, start_price: 27_000.0, omega: 0.8, alpha: 0.10, beta: 0.82, corr_before: 1.0, corr_after: 1.0 },
    Asset { id: "SPX", drift: 0.03, start_price: 4_300.0, omega: 0.08, alpha: 0.08, beta: 0.84, corr_before: 0.05, corr_after: 0.55 },
    Asset { id: "GOLD", drift: 0.02, start_price: 1_900.0, omega: 0.06, alpha: 0.07, beta: 0.85, corr_before: 0.30, corr_after: 0.0 },
    Asset { id: "DXY", drift: 0.0, start_price: 105.0, omega: 0.015, alpha: 0.06, beta: 0.86, corr_before: -0.30, corr_after: -0.05 },
];

fn yahoo_row(out: &mut String, date: NaiveDate, open: f64, close: f64, volume: u64) {
    let high = open.max(close) * 1.004;
    let low = open.min(close) * 0.996;
    let _ = writeln!(out, "{date},{open:.4},{high:.4},{low:.4},{close:.4},{close:.4},{volume}");
}

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;

    let first = NaiveDate::from_ymd_opt(2023, 6, 1).unwrap();
    let last = NaiveDate::from_ymd_opt(2024, 5, 31).unwrap();
    let event = NaiveDate::from_ymd_opt(2024, 1, 10).unwrap();
    let is_weekday = |d: NaiveDate| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun);

    let mut rng = ChaCha8Rng::seed_from_u64(20_240_110);
    let weekdays: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).filter(|d| is_weekday(*d)).collect();

    // percent log returns per weekday, per asset
    let mut h: Vec<f64> = ASSETS.iter().map(|a| a.omega / (1.0 - a.alpha - a.beta)).collect();
    let mut e_prev = vec![0.0; ASSETS.len()];
    let mut returns = vec![Vec::with_capacity(weekdays.len()); ASSETS.len()];
    for d in &weekdays {
        let common: f64 = StandardNormal.sample(&mut rng);
        for (i, a) in ASSETS.iter().enumerate() {
            h[i] = a.omega + a.alpha * e_prev[i] * e_prev[i] + a.beta * h[i];
            let rho = if *d < event { a.corr_before } else { a.corr_after };
            let own: f64 = StandardNormal.sample(&mut rng);
            let z = rho * common + (1.0 - rho * rho).sqrt() * own;
            e_prev[i] = h[i].sqrt() * z;
            returns[i].push(a.drift + e_prev[i]);
        }
    }

    for (i, a) in ASSETS.iter().enumerate() {
        let mut csv = String::from("Date,Open,High,Low,Close,Adj Close,Volume\n");
        let mut price = a.start_price;
        yahoo_row(&mut csv, weekdays[0], price, price, 1_000_000);
        for (k, d) in weekdays.iter().enumerate().skip(1) {
            let next = price * (returns[i][k] / 100.0).exp();
            if a.id == "BTC" {
                // weekend days between the previous weekday and this one
                let mut p = price;
                let mut day = weekdays[k - 1] + Duration::days(1);
                while day < *d {
                    let w: f64 = rng.random_range(-0.01..0.01);
                    let q = p * w.exp();
                    yahoo_row(&mut csv, day, p, q, 500_000);
                    p = q;
                    day += Duration::days(1);
                }
                yahoo_row(&mut csv, *d, p, next, 1_000_000);
            } else {
                yahoo_row(&mut csv, *d, price, next, 1_000_000);
            }
            // parse the rounded close so weekday returns match the file
            price = format!("{next:.4}").parse().unwrap();
        }
        std::fs::write(dir.join(format!("{}.csv", a.id)), csv)?;
    }
    println!("fixture written to {}", dir.display());
    Ok(())
}
