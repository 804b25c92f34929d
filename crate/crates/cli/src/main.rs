use std::process::ExitCode;

use clap::Parser;

use ctxscope_cli::{run, Cli, CliError};
use ctxscope_core::Error;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Core(Error::EmptyQuery { unresolved }) => {
                    eprintln!("ctx: EMPTY_QUERY: nothing in the query matches the index (unresolved: {unresolved:?})")
                }
                other => eprintln!("ctx: {other}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
