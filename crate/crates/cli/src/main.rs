use std::io;
use std::process::ExitCode;

use clap::Parser;
use epde_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match epde_cli::run(&cli, &mut io::stdout().lock(), &mut io::stderr().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
