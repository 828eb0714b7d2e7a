use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use corrbreak::pipeline::{cmd_run, cmd_stage, exit_code, init_logging, Stage, EXIT_OK, EXIT_USAGE};

/// Correlation regime-change analysis around a dated market event.
#[derive(Parser)]
#[command(name = "corrbreak", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write tables, figure data, manifest and report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to output.dir from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one stage (adf, roll, chow, garch or dcc) and write only its files.
    Stage {
        name: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => code(EXIT_OK),
                _ => code(EXIT_USAGE),
            };
        }
    };
    init_logging();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Stage { name, config, out } => match name.parse::<Stage>() {
            Ok(stage) => cmd_stage(stage, &config, out.as_deref()),
            Err(e) => {
                eprintln!("error: {e}");
                return code(EXIT_USAGE);
            }
        },
    };
    match &result {
        Ok(summary) => {
            for (stage, why) in summary.outputs.skipped() {
                eprintln!("warning: stage {stage} skipped: {why}");
            }
            println!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    code(exit_code(&result))
}
