use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use congested_ot::args::Cli;
use congested_ot::exit::ExitKind;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation failures; status 2 is reserved for non-convergence
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitKind::Validation.code())
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match congested_ot::run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(ExitKind::Validation.code());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.code())
        }
    }
}
