//! Chow tests for a structural break at the event date: first on the
//! pairwise return regression, then on the rolling-correlation series.
//!
//! ```text
//! cargo run --example chow_break
//! ```

use std::path::Path;

use corrbreak::chow::{break_fit_figure_data, chow_on_pairwise_returns, chow_on_rolling_corr, significance_stars};
use corrbreak::ingest::parse_price_csv;
use corrbreak::rolling::rolling_correlation;
use corrbreak::series::{align_panel, compute_returns, EventWindow};

fn main() -> corrbreak::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut returns = Vec::new();
    for id in ["BTC", "SPX", "GOLD", "DXY"] {
        returns.push(compute_returns(&parse_price_csv(&dir.join(format!("{id}.csv")), id)?, 0.0)?);
    }
    let panel = align_panel(&returns)?;
    let window = EventWindow::new(
        "2024-01-10".parse()?,
        "2023-10-01".parse()?,
        "2024-01-09".parse()?,
        "2024-01-11".parse()?,
        "2024-04-30".parse()?,
    )?;

    println!("BTC excess return regressed on each asset:");
    for other in ["SPX", "GOLD", "DXY"] {
        let c = chow_on_pairwise_returns(&panel, &window, "BTC", other)?;
        let r = &c.result;
        println!(
            "  {other:<4} F = {:.4}{:<3} p = {:.4}  (n1 = {}, n2 = {})",
            r.chow_statistic,
            significance_stars(r.p_value),
            r.p_value,
            r.n1,
            r.n2
        );
    }

    println!("\nMean shift in the 30-day rolling correlation:");
    for other in ["SPX", "GOLD", "DXY"] {
        let series = rolling_correlation(&panel, "BTC", other, 30)?;
        let c = chow_on_rolling_corr(&series, &window, false)?;
        let fig = break_fit_figure_data(&c.result, &c.dates)?;
        let last_pre = fig.rows.get(c.result.n1 - 1).map(|r| r.fitted_segmented).unwrap_or(f64::NAN);
        let first_post = fig.rows.get(c.result.n1).map(|r| r.fitted_segmented).unwrap_or(f64::NAN);
        println!(
            "  {other:<4} F = {:.4}{:<3} fitted level {:+.3} -> {:+.3}",
            c.result.chow_statistic,
            significance_stars(c.result.p_value),
            last_pre,
            first_post
        );
    }
    Ok(())
}
