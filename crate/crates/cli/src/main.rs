use std::process::ExitCode;

use clap::Parser;
use netequil_cli::app::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse()).into()
}
