use std::io::Write;
use std::process::ExitCode;

use altupdate_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            // A closed stdout (e.g. piped into `head`) must not turn a finished run into a failure.
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", outcome.summary);
            let _ = writeln!(out, "wrote {} file(s) to {}", outcome.files.len(), outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
