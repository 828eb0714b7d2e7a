//! Augmented Dickey-Fuller tests: fixture returns are stationary, their
//! cumulative log prices are not.
//!
//! ```text
//! cargo run --example adf_stationarity
//! ```

use std::path::Path;

use corrbreak::adf::{adf_test, AdfVariant, LagSelection};
use corrbreak::ingest::parse_price_csv;
use corrbreak::series::compute_returns;

fn main() -> corrbreak::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    println!("{:<5} {:>10} {:>10} {:>5} {:>12} {:>10}", "asset", "ADF(ret)", "p", "lags", "ADF(log p)", "p");
    for id in ["BTC", "SPX", "GOLD", "DXY"] {
        let prices = parse_price_csv(&dir.join(format!("{id}.csv")), id)?;
        let returns = compute_returns(&prices, 0.0)?.values();
        let levels: Vec<f64> = prices.observations().iter().map(|(_, p)| p.ln()).collect();
        let r = adf_test(&returns, AdfVariant::Constant, LagSelection::Aic(None))?;
        let l = adf_test(&levels, AdfVariant::Constant, LagSelection::Aic(None))?;
        println!(
            "{id:<5} {:>10.4} {:>10.4} {:>5} {:>12.4} {:>10.4}",
            r.adf_statistic, r.p_value, r.lags_used, l.adf_statistic, l.p_value
        );
    }

    // fixed lag order and the trend variant on one series
    let prices = parse_price_csv(&dir.join("BTC.csv"), "BTC")?;
    let returns = compute_returns(&prices, 0.0)?.values();
    for variant in [AdfVariant::None, AdfVariant::Constant, AdfVariant::ConstantTrend] {
        let r = adf_test(&returns, variant, LagSelection::Fixed(2))?;
        println!("BTC, 2 lags, {variant:<15} stat {:.4}  p {:.2e}", r.adf_statistic, r.p_value);
    }
    Ok(())
}
