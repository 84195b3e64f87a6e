use std::process::ExitCode;

use stabcp_cli::{config, harness, CliError};

fn run() -> Result<String, CliError> {
    let cfg = config::parse_args(std::env::args_os())?;
    let output = harness::run(&cfg)?;
    Ok(harness::report(&cfg, &output))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(CliError::Help(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
