use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    bonsai_cli::execute(bonsai_cli::Cli::parse())
}
