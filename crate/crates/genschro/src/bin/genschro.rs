use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "genschro",
    about = "Scenario runner for the generalized-momentum Schrödinger field-theory lab",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a scenario and write snapshots.csv plus report.json.
    Run {
        /// Scenario file (flat dotted-key format).
        config: PathBuf,
        /// Override output.dir from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compute the low spectrum and write spectrum.csv.
    Spectrum { config: PathBuf },
    /// Run the invariant suite and print PASS/FAIL per check.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, output_dir } => {
            genschro::cli::cmd_run(&config, output_dir.as_deref()).map(|()| true)
        }
        Command::Spectrum { config } => genschro::cli::cmd_spectrum(&config).map(|()| true),
        Command::Check { config } => genschro::cli::cmd_check(&config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
