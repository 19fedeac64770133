use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    psa_cli::run(psa_cli::Args::parse())
}
