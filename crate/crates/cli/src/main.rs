//! `georisk` — regional risk scores, weight fitting, and choropleth maps.
//!
//! Exit codes: 0 on success, 1 for user errors (bad paths, malformed data,
//! invalid flags), 2 for internal errors. The `GEORISK_LOG` environment
//! variable (`off`|`info`|`debug`) controls log verbosity on stderr.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Command;

/// Percentile-based risk scores for geographic regions: compute scores,
/// fit mixing weights against observed outcomes, and render maps.
#[derive(Parser)]
#[command(name = "georisk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .parse_filters(&std::env::var("GEORISK_LOG").unwrap_or_else(|_| "off".into()))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Usage problems are user errors: exit 1, not clap's default 2.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    match cli.command.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit)
        }
    }
}
