use std::process::ExitCode;

use clap::Parser;
use holosched::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    ExitCode::from(holosched::execute(cli) as u8)
}
