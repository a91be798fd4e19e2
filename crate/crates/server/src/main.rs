use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    plmflow_server::cli::run(plmflow_server::cli::Cli::parse(), &mut std::io::stdout())
}
