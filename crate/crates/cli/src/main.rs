mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use config::{Flags, RunConfig};
use error::CliError;
use output::OutputDir;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn execute(flags: &Flags) -> Result<bool, CliError> {
    let resolved = RunConfig::load(flags)?;
    let validated = resolved.validate()?;
    let mut out = OutputDir::create(&validated.out_dir)?;
    // the echo sits inside the output directory, so its path is left out
    let mut echo = resolved.clone();
    echo.output.dir = None;
    out.json("resolved_config.json", &echo)?;
    let passed = commands::run(&validated, &mut out)?;
    log::info!("wrote {}", out.written().join(", "));
    Ok(passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let flags = Flags::parse();
    match execute(&flags) {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => {
            eprintln!("{}", serde_json::json!({ "verdict": "fail" }));
            ExitCode::from(EXIT_FAIL)
        }
        Err(e) => {
            let record = serde_json::to_string(&e.record()).unwrap_or_else(|_| e.to_string());
            eprintln!("{record}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
