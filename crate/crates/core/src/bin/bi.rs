use std::process::ExitCode;

use bi_core::harness::{run, Cli, ExitStatus};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit code 2 would collide with the breakdown status
            let status = if e.use_stderr() {
                ExitStatus::ConfigError.code()
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(status as u8);
        }
    };
    ExitCode::from(run(&cli).code() as u8)
}
