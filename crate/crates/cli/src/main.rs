use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grevf::{fit, Overrides};

#[derive(Parser)]
#[command(name = "grevf", version, about = "Gaussian random element regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write a JSON report.
    Fit {
        config: PathBuf,
        /// Report path (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optimizer seed (overrides `optimizer.seed`).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let Command::Fit {
        config,
        out,
        seed,
        verbose,
    } = Cli::parse().command;
    let level = if verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match fit(&config, &Overrides { out, seed }) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
