//! `riskpg` command-line tool.
//!
//! JSON results go to stdout. Failures print a JSON error record to stderr
//! and exit with 2 (usage), 3 (I/O), 4 (parse) or 5 (domain error).

mod args;
mod commands;
mod error;
mod input;

use clap::Parser;

use args::Cli;
use error::{CliError, EXIT_USAGE};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = CliError::Usage(e.render().to_string());
            eprintln!(
                "{}",
                serde_json::to_string(&err.record()).unwrap_or_default()
            );
            std::process::exit(EXIT_USAGE);
        }
        Err(e) => e.exit(),
    };
    if let Err(e) = commands::run(cli.command) {
        eprintln!("{}", serde_json::to_string(&e.record()).unwrap_or_default());
        std::process::exit(e.exit_code());
    }
}
