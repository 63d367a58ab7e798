use std::process::ExitCode;

use clap::Parser;
use env_logger::Env;

mod args;
mod commands;
mod error;
mod settings;

use args::{Cli, Command};
use settings::ConfigFile;

fn run(cli: &Cli) -> Result<(), error::CliError> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Bounds(a) => commands::bounds(a, &file),
        Command::Verify(a) => commands::verify(a, &file),
        Command::Simulate(a) => commands::simulate(a, &file),
        Command::Sweep(a) => commands::sweep(a, &file),
        Command::Table1(a) => commands::table1(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::new().filter_or("MRC_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrc-dof-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
