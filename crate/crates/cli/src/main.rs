//! `palpsim` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error.

mod commands;
mod predictions;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "palpsim", version, about = "Quasi-static 2D palpation simulator and image metrics")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// `key = value` configuration file; unset keys keep their defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_name = "N")]
    pub n_bodies: Option<usize>,

    #[arg(long, value_name = "N")]
    pub n_trials: Option<usize>,

    #[arg(long, value_name = "N")]
    pub n_traj: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Bodies whose id is a multiple of this form the validation split.
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub val_every: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset.
    Generate {
        #[command(flatten)]
        sim: SimArgs,

        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Rasterize the ground truth of one body and trial without simulating.
    RenderGt {
        #[command(flatten)]
        sim: SimArgs,

        #[arg(long, value_name = "I", default_value_t = 0)]
        body: u64,

        #[arg(long, value_name = "T", default_value_t = 0)]
        trial: usize,

        /// Output class image (`.pimg`).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,

        /// Also print the image as text.
        #[arg(long)]
        ascii: bool,
    },

    /// Force-map baseline over a dataset, written as a prediction tree.
    ForceMap {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,

        #[arg(long, value_name = "DIR")]
        out: PathBuf,

        /// Kernel bandwidth in pixels.
        #[arg(long, value_name = "PX", default_value_t = palpsim::forcemap::DEFAULT_BANDWIDTH_PIXELS)]
        bandwidth: f64,

        /// Use this threshold instead of tuning it on the validation split.
        #[arg(long, value_name = "T")]
        threshold: Option<f64>,

        #[command(flatten)]
        split: SplitArgs,
    },

    /// Change score between two image stacks, or a confusion matrix over a
    /// prediction tree.
    ChangeScore {
        /// Images of the first stack (pair mode).
        #[arg(long, value_name = "FILE", num_args = 1.., requires = "b", conflicts_with_all = ["data", "pred"])]
        a: Vec<PathBuf>,

        /// Images of the second stack (pair mode).
        #[arg(long, value_name = "FILE", num_args = 1.., requires = "a")]
        b: Vec<PathBuf>,

        /// Write the score map (`.pfim`) here (pair mode).
        #[arg(long, value_name = "FILE", requires = "a")]
        score_map: Option<PathBuf>,

        /// Dataset with the change flags (dataset mode).
        #[arg(long, value_name = "DIR", requires = "pred")]
        data: Option<PathBuf>,

        /// Prediction tree with `pred_*.pimg` stacks (dataset mode).
        #[arg(long, value_name = "DIR", requires = "data")]
        pred: Option<PathBuf>,

        /// Confidence constant C.
        #[arg(long, default_value_t = palpsim::change::DEFAULT_CONFIDENCE_CONSTANT)]
        c: f64,

        #[arg(long, default_value_t = palpsim::change::DEFAULT_THRESHOLD)]
        threshold: f64,

        /// Classify by relative growth of the predicted lump size instead.
        #[arg(long, value_name = "REL")]
        lump_size: Option<f64>,
    },

    /// F1, lump size error and CoM error of predictions against ground truth.
    Metrics {
        /// Dataset with ground truth.
        #[arg(long, value_name = "DIR", requires = "pred", conflicts_with_all = ["image", "gt"])]
        data: Option<PathBuf>,

        /// Prediction tree.
        #[arg(long, value_name = "DIR")]
        pred: Option<PathBuf>,

        /// Single predicted image (pair mode).
        #[arg(long, value_name = "FILE", requires = "gt")]
        image: Option<PathBuf>,

        /// Single ground-truth image (pair mode).
        #[arg(long, value_name = "FILE", requires = "image")]
        gt: Option<PathBuf>,

        /// Which bodies to score.
        #[arg(long, value_enum, default_value_t = predictions::Split::All)]
        split: predictions::Split,

        #[command(flatten)]
        split_args: SplitArgs,
    },

    /// Summarize a dataset (with its tree hash) or a single file.
    Inspect {
        /// Dataset directory or `.palp`/`.pimg`/`.pfim` file.
        path: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
