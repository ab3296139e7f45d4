use std::process::ExitCode;

use clap::Parser;
use regfilter_cli::cli::{run, Cli};
use regfilter_cli::exit_code;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let mut message = err.to_string();
            for cause in err.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::from(exit_code(&err))
        }
    }
}
