use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use sv2svt_pipeline::cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(out) => {
            for line in &out.stderr {
                eprintln!("warning: {line}");
            }
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(&out.stdout)
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
