//! qctrl: train control policies, run search oracles, replay stored
//! sequences, and export plot-ready CSVs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qctrl_core::QctrlError;

mod artifacts;
mod commands;
mod config;

#[derive(Parser)]
#[command(name = "qctrl", version, about = "Black-box quantum control runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from an experiment config and write run artifacts.
    Train {
        /// Path to the experiment config (JSON).
        config: PathBuf,
    },
    /// Run a search oracle over the configured task.
    Oracle {
        /// Path to the experiment config (JSON).
        config: PathBuf,
        /// brute (exhaustive, discrete tasks only) or random.
        #[arg(long)]
        mode: String,
        /// Sample count for random mode.
        #[arg(long, default_value_t = 1000)]
        n: u64,
    },
    /// Re-score a stored best sequence and verify the stored reward.
    Replay {
        /// Run directory produced by train or oracle.
        run_dir: PathBuf,
        /// Index into the stored best sequences (0 = best).
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Write convergence.csv and sequences.csv into a run directory.
    ExportPlots {
        /// Run directory produced by train.
        run_dir: PathBuf,
    },
}

/// Exit codes: 0 ok, 2 config error, 3 space too large, 4 artifact error.
fn exit_code(err: &QctrlError) -> (u8, &'static str) {
    match err {
        QctrlError::ConfigInvalid(_) | QctrlError::Serde(_) => (2, "config"),
        QctrlError::SpaceTooLarge { .. } => (3, "space"),
        QctrlError::MissingArtifact(_) | QctrlError::RewardMismatch { .. } | QctrlError::Io(_) => {
            (4, "artifact")
        }
        _ => (4, "artifact"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config } => commands::cmd_train(&config).map(|_| ()),
        Command::Oracle { config, mode, n } => commands::cmd_oracle(&config, &mode, n).map(|_| ()),
        Command::Replay { run_dir, index } => commands::cmd_replay(&run_dir, index).map(|_| ()),
        Command::ExportPlots { run_dir } => commands::cmd_export_plots(&run_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = exit_code(&err);
            eprintln!("error[{kind}]: {err}");
            ExitCode::from(code)
        }
    }
}
