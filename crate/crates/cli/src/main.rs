mod args;
mod error;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use error::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if cli.jobs > 0 {
        pool = pool.num_threads(cli.jobs);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            let err = CliError::Config(format!("cannot start {} worker threads: {e}", cli.jobs));
            eprintln!("ted: {err}");
            return err.exit_code();
        }
    };

    match pool.install(|| run::run(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ted: {err}");
            err.exit_code()
        }
    }
}
