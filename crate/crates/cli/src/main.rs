use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use surface_split_cli::{run, Cli};

fn main() -> ExitCode {
    let config = Cli::parse().into_config();
    let outcome = run(&config);
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    let _ = std::io::stdout().flush();
    ExitCode::from(outcome.exit_code as u8)
}
