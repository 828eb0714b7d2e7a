//! Runs every stage on the bundled fixture, writes the tables and figure data
//! to a temporary directory and prints the text report.
//!
//! ```text
//! cargo run --example full_pipeline [-- <config.toml>]
//! ```

use std::path::{Path, PathBuf};

use corrbreak::pipeline::cmd_run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("config.toml"));
    let out = std::env::temp_dir().join(format!("corrbreak-example-{}", std::process::id()));
    let summary = cmd_run(&config, Some(&out))?;
    for (stage, why) in summary.outputs.skipped() {
        println!("stage {stage} skipped: {why}");
    }
    println!("{}", std::fs::read_to_string(out.join("report.txt"))?);
    println!("{} files written to {}", summary.files.len(), summary.out_dir.display());
    Ok(())
}
