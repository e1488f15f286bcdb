use std::process::ExitCode;

use clap::Parser;
use kgd_cli::{Cli, UsageError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match kgd_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // violated checks and runtime failures both exit with 1
            let code = if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 };
            ExitCode::from(code)
        }
    }
}
