//! Loads two fixture price files, turns them into log excess returns and
//! aligns them on common dates.
//!
//! BTC trades on weekends while SPX does not, so the intersection keeps only
//! weekdays. Forward-fill keeps every BTC date and gives SPX a zero return on
//! days it did not trade.
//!
//! ```text
//! cargo run --example returns_and_alignment
//! ```

use std::path::Path;

use corrbreak::ingest::parse_price_csv;
use corrbreak::series::{align_panel_with, compute_returns, descriptive_stats, segment, AlignPolicy, TradingDate, EventWindow};

fn main() -> corrbreak::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let btc = parse_price_csv(&dir.join("BTC.csv"), "BTC")?;
    let spx = parse_price_csv(&dir.join("SPX.csv"), "SPX")?;
    println!("BTC: {} prices, SPX: {} prices", btc.len(), spx.len());

    let returns = [compute_returns(&btc, 0.0)?, compute_returns(&spx, 0.0)?];
    let inner = align_panel_with(&returns, AlignPolicy::Intersection)?;
    let filled = align_panel_with(&returns, AlignPolicy::ForwardFill)?;
    println!("intersection: {} dates, forward-fill: {} dates", inner.len(), filled.len());

    let event: TradingDate = "2024-01-10".parse()?;
    let window = EventWindow::new(
        event,
        "2023-10-01".parse()?,
        "2024-01-09".parse()?,
        "2024-01-11".parse()?,
        "2024-04-30".parse()?,
    )?;
    let (pre, post) = segment(&inner, &window)?;
    println!("pre segment {} rows, post segment {} rows (event day excluded)", pre.len(), post.len());

    println!("\n{:<5} {:<5} {:>12} {:>10} {:>10} {:>9}", "asset", "seg", "mean price", "std price", "mean ret", "std ret");
    for row in descriptive_stats(&inner, &[btc, spx], &window)? {
        println!(
            "{:<5} {:<5} {:>12.1} {:>10.1} {:>10.4} {:>9.4}",
            row.asset_id, row.segment, row.mean_price, row.std_price, row.mean_return, row.std_return
        );
    }
    Ok(())
}
