use std::process::ExitCode;

use clap::Parser;
use qfcanon::cli::{run, Cli, ExitStatus};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.stdout);
            ExitCode::from(report.status.code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(ExitStatus::of(&err).code() as u8)
        }
    }
}
