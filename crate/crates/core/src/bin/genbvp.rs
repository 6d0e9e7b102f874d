use clap::error::ErrorKind;
use clap::Parser;
use genbvp::cli::{run, usage_error, Cli, RunConfig};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => std::process::exit(usage_error(&e.to_string())),
    };
    std::process::exit(run(&RunConfig::from(cli)));
}
