//! ARMA(1,1)-GARCH(1,1) estimation: parameter recovery on a simulated series,
//! then a fit on the fixture's BTC percent returns.
//!
//! ```text
//! cargo run --example garch_fit
//! ```

use std::path::Path;

use corrbreak::garch::{fit_garch, fit_garch_returns, simulate_garch, GarchFit, GarchParams, GarchSpec};
use corrbreak::ingest::parse_price_csv;
use corrbreak::series::compute_returns;

fn print_fit(fit: &GarchFit) {
    println!("  loglik {:.3} after {} iterations", fit.loglik, fit.iterations);
    let values = fit.params.to_vec();
    for (i, name) in fit.param_names.iter().enumerate() {
        let t = fit.t_stats.as_ref().map(|t| format!("{:8.3}", t[i])).unwrap_or_else(|| "     n/a".into());
        println!("  {name:<7} {:>10.4}  t {t}", values[i]);
    }
}

fn main() -> corrbreak::Result<()> {
    let spec = GarchSpec::default();
    let truth = GarchParams { mu: 0.05, ar: vec![0.2], ma: vec![-0.1], omega: 0.1, alpha: vec![0.1], beta: vec![0.8] };
    let sim = simulate_garch(&spec, &truth, 5000, 7)?;
    println!("simulated, true values mu 0.05 ar1 0.2 ma1 -0.1 omega 0.1 alpha1 0.1 beta1 0.8:");
    print_fit(&fit_garch(&sim, &spec)?);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let returns = compute_returns(&parse_price_csv(&dir.join("SPX.csv"), "SPX")?, 0.0)?;
    let fit = fit_garch_returns(&returns, &spec)?;
    println!("\nfixture SPX, percent returns (scale {}):", fit.scale);
    print_fit(&fit);
    let (m, v) = fit.residual_moments();
    println!("  standardized residuals: mean {m:.3}, variance {v:.3}");
    Ok(())
}
