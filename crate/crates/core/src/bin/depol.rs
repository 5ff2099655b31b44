use std::process::ExitCode;

use clap::Parser;
use depol_core::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.tag(), "exit_code": e.exit_code(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
