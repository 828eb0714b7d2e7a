//! Trailing 30- and 60-day correlations between BTC and each other fixture
//! asset, with averages on either side of the event.
//!
//! ```text
//! cargo run --example rolling_correlation
//! ```

use std::path::Path;

use corrbreak::ingest::parse_price_csv;
use corrbreak::rolling::rolling_correlation;
use corrbreak::series::{align_panel, compute_returns, TradingDate};

fn main() -> corrbreak::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut returns = Vec::new();
    for id in ["BTC", "SPX", "GOLD", "DXY"] {
        let prices = parse_price_csv(&dir.join(format!("{id}.csv")), id)?;
        returns.push(compute_returns(&prices, 0.0)?);
    }
    let panel = align_panel(&returns)?;
    let event: TradingDate = "2024-01-10".parse()?;

    for other in ["SPX", "GOLD", "DXY"] {
        for window in [30, 60] {
            let series = rolling_correlation(&panel, "BTC", other, window)?;
            let (defined, _) = series.defined();
            let before: Vec<f64> = defined.iter().filter(|(d, _)| *d < event).map(|(_, v)| *v).collect();
            let after: Vec<f64> = defined.iter().filter(|(d, _)| *d > event).map(|(_, v)| *v).collect();
            let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "BTC-{other:<4} {window}d: {} windows, mean before {:+.3}, after {:+.3}",
                defined.len(),
                avg(&before),
                avg(&after)
            );
        }
    }

    // a few labelled points: each value belongs to the window's last date
    let s = rolling_correlation(&panel, "BTC", "SPX", 30)?;
    println!();
    for (d, v) in s.observations.iter().step_by(40) {
        println!("{d}  {:+.4}", v.unwrap_or(f64::NAN));
    }
    Ok(())
}
