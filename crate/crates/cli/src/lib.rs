//! File formats, reports and the command-line front end for `congested-ot-core`.

pub mod args;
pub mod commands;
pub mod exit;
pub mod input;
pub mod report;

use args::{Cli, Command};
use exit::CliError;

/// Runs a parsed command line and returns what goes to stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Solve(a) => commands::solve(a, cli.verbose),
        Command::Inverse(a) => commands::inverse(a),
        Command::Bounds(a) => commands::bounds(&a.input),
        Command::Sensitivity(a) => commands::sensitivity(a),
        Command::CheckAssumptions(a) => commands::check_assumptions(&a.input),
        Command::Oracle(a) => commands::oracle(a),
        Command::Analyze(a) => commands::analyze(a),
    }
}
