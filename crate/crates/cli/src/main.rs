use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtrack::run::format_summary;
use dtrack::{config, CliError, RunConfig, TrackerKind};

#[derive(Parser)]
#[command(name = "dtrack", version, about = "Simulate, track and evaluate multiobject tracking runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate frames and ground truth into a run archive.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Simulate only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Archive directory (defaults to `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run trackers on an archive.
    Track {
        #[arg(long)]
        out: PathBuf,
        /// direct or baseline-mp; repeat for several.
        #[arg(long, required = true, value_parser = parse_tracker)]
        tracker: Vec<TrackerKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compute GOSPA files and the summary of an archive.
    Evaluate {
        #[arg(long)]
        out: PathBuf,
    },
    /// simulate + track + evaluate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to all trackers.
        #[arg(long, value_parser = parse_tracker)]
        tracker: Vec<TrackerKind>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn parse_tracker(s: &str) -> Result<TrackerKind, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> Result<PathBuf, CliError> {
    flag.or_else(|| config.out.clone())
        .ok_or_else(|| CliError::config("no output directory: pass --out or set `out` in the config"))
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    config::load(path)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            workers,
        } => {
            let config = load(&config)?;
            let out = out_dir(out, &config)?;
            dtrack::simulate(&config, &out, seed, workers)
        }
        Command::Track {
            out,
            tracker,
            seed,
            workers,
        } => dtrack::track(&out, &tracker, seed, workers),
        Command::Evaluate { out } => {
            print!("{}", format_summary(&dtrack::evaluate(&out)?));
            Ok(())
        }
        Command::Sweep {
            config,
            seed,
            out,
            tracker,
            workers,
        } => {
            let config = load(&config)?;
            let out = out_dir(out, &config)?;
            let trackers = if tracker.is_empty() {
                TrackerKind::ALL.to_vec()
            } else {
                tracker
            };
            print!("{}", format_summary(&dtrack::sweep(&config, &out, &trackers, seed, workers)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dtrack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
