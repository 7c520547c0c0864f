//! Command-line front end for `dp-stts`: ingest, build, synthesize, evaluate.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod spec;

pub use args::{Cli, Command};
pub use error::{exit, CliError};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Build(a) => commands::cmd_build(a, config),
        Command::Synthesize(a) => commands::cmd_synthesize(a, config),
        Command::Evaluate(a) => commands::cmd_evaluate(a, config),
        Command::Pipeline(a) => commands::cmd_pipeline(a, config),
    }
}
