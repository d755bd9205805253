//! `prospector` — golden-score data prospecting pipeline.
//!
//! Exit codes: 0 success, 2 usage/configuration, 3 data, 4 backend,
//! 5 I/O, 1 internal.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prospector_core::error::Error;
use prospector_core::Direction;

use config::ConfigArgs;

#[derive(Parser)]
#[command(
    name = "prospector",
    version,
    about = "Rank instruction-tuning data by golden score and build refined task sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a predefined task set (refined by default, random with --random).
    Refine {
        #[command(flatten)]
        config: ConfigArgs,

        /// Output task-set file (JSON lines).
        #[arg(long)]
        output: PathBuf,

        /// Sample this many tasks uniformly instead of refining.
        #[arg(long)]
        random: Option<usize>,
    },

    /// Score every dataset example against a task set (resumable).
    Prospect {
        #[command(flatten)]
        config: ConfigArgs,

        /// Task-set file produced by `refine`.
        #[arg(long)]
        tasks: PathBuf,

        /// Output scores file (JSON lines, one report per example).
        #[arg(long)]
        output: PathBuf,
    },

    /// Export a ranked slice of the dataset as a training subset.
    Export {
        /// Scores file produced by `prospect`.
        #[arg(long)]
        scores: PathBuf,

        /// The dataset the scores refer to.
        #[arg(long)]
        dataset: PathBuf,

        /// Dataset format: alpaca_json or jsonl.
        #[arg(long, default_value = "alpaca_json")]
        format: String,

        /// Fraction of the ranking to keep, in (0, 1].
        #[arg(long)]
        fraction: f64,

        /// Which end of the ranking: top or bottom.
        #[arg(long, default_value = "top")]
        direction: Direction,

        /// Output dataset file.
        #[arg(long)]
        output: PathBuf,
    },

    /// Agreement between selections from two or more scores files.
    Overlap {
        /// Scores files (repeat the flag; at least two).
        #[arg(long = "scores", required = true)]
        scores: Vec<PathBuf>,

        /// Labels for the scores files (repeat; defaults to file stems).
        #[arg(long = "label")]
        labels: Vec<String>,

        /// Fraction of each ranking to compare, in (0, 1].
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,

        /// Which end of the ranking: top or bottom.
        #[arg(long, default_value = "top")]
        direction: Direction,

        /// Write the overlap matrix CSV here as well.
        #[arg(long)]
        output: Option<PathBuf>,
    },

    /// Inference-count arithmetic for a prospecting run.
    Cost {
        /// Number of candidate examples.
        dataset_size: u64,

        /// Number of predefined tasks (m).
        task_count: u64,

        /// Prospector model parameter count (any unit).
        #[arg(long, default_value_t = 1.0)]
        prospector_params: f64,

        /// Baseline task count.
        #[arg(long, default_value_t = 1000)]
        baseline_tasks: u64,

        /// Baseline model parameter count (same unit).
        #[arg(long, default_value_t = 1.0)]
        baseline_params: f64,

        /// Write the estimate as JSON here as well.
        #[arg(long)]
        output: Option<PathBuf>,
    },

    /// Emit histogram, selection, and overlap report files.
    Report {
        /// Scores files (repeat the flag).
        #[arg(long = "scores", required = true)]
        scores: Vec<PathBuf>,

        /// Labels for the scores files (repeat; defaults to file stems).
        #[arg(long = "label")]
        labels: Vec<String>,

        /// Selection fraction used for summaries and overlaps.
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,

        /// Which end of the ranking: top or bottom.
        #[arg(long, default_value = "top")]
        direction: Direction,

        /// Directory for the report files.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Refine {
            config,
            output,
            random,
        } => commands::cmd_refine(&config, &output, random),
        Command::Prospect {
            config,
            tasks,
            output,
        } => commands::cmd_prospect(&config, &tasks, &output),
        Command::Export {
            scores,
            dataset,
            format,
            fraction,
            direction,
            output,
        } => commands::cmd_export(&scores, &dataset, &format, fraction, direction, &output),
        Command::Overlap {
            scores,
            labels,
            fraction,
            direction,
            output,
        } => commands::cmd_overlap(&scores, &labels, fraction, direction, output.as_deref()),
        Command::Cost {
            dataset_size,
            task_count,
            prospector_params,
            baseline_tasks,
            baseline_params,
            output,
        } => commands::cmd_cost(
            dataset_size,
            task_count,
            prospector_params,
            baseline_tasks,
            baseline_params,
            output.as_deref(),
        ),
        Command::Report {
            scores,
            labels,
            fraction,
            direction,
            out_dir,
        } => commands::cmd_report(&scores, &labels, fraction, direction, &out_dir),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Template(_) => 2,
        Error::Parse { .. }
        | Error::EmptyDataset { .. }
        | Error::EmptyContinuation
        | Error::InvalidInput(_)
        | Error::StaleCache { .. } => 3,
        Error::Backend { .. } => 4,
        Error::Io(_) | Error::Json(_) => 5,
        Error::Invariant(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
