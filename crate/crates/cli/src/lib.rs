//! Command-line front end for the `distboost` library.
//!
//! Every subcommand takes its settings from flags or from a flat
//! `key = value` file given with `--config`; flags win. Outputs go to the
//! directory from `--out-dir`, the `DISTBOOST_OUT_DIR` environment variable,
//! or `./distboost-out`, in that order.

// NaN must fail range checks, so `!(x >= lo)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_RUNTIME};

#[derive(Debug, Parser)]
#[command(
    name = "distboost",
    version,
    about = "Likelihood boosting with distinguishers for discrete sequence models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Flat `key = value` settings file; command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $DISTBOOST_OUT_DIR or ./distboost-out).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CorpusArgs {
    /// Corpus file: one sequence per line, whitespace-separated tokens.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Padded sequence length N (default: longest line).
    #[arg(long = "len")]
    pub len: Option<usize>,
    /// Pad token.
    #[arg(long)]
    pub pad: Option<String>,
    /// Fixed vocabulary file (one token per line, pad first).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an n-gram model by counting and report its log-loss.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// n-gram order k.
        #[arg(long)]
        order: Option<usize>,
        /// Additive smoothing λ.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Boost an initial model against a distinguisher oracle until its advantage drops below ε.
    Boost {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Initial model: `uniform`, `fit`, or a model file path.
        #[arg(long)]
        init: Option<String>,
        /// n-gram order for `--init fit` (and for `uniform`).
        #[arg(long)]
        order: Option<usize>,
        /// Smoothing for `--init fit`.
        #[arg(long)]
        lambda: Option<f64>,
        /// `token-indicator`, `ngram-indicator <k>`, or `log-ratio(<model path>)`.
        #[arg(long)]
        oracle: Option<String>,
        /// Advantage threshold ε.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Cap on reweighting steps (default: 10 × the iteration bound).
        #[arg(long)]
        max_iters: Option<usize>,
        /// Recompute every conditional instead of caching corpus prefixes.
        #[arg(long)]
        no_memo: bool,
        /// Fill the trace timing columns with wall-clock measurements.
        #[arg(long)]
        timings: bool,
    },
    /// Evaluate one distinguisher's training advantage against a model.
    Distinguish {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Model file; omitted means uniform.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Distinguisher, e.g. `token-indicator b`, `ngram-indicator 2 ^ a`, `flip token-indicator a`, `token-frequency b`.
        #[arg(long)]
        distinguisher: Option<String>,
        /// `exact` or `monte-carlo` (whole-sequence distinguishers only).
        #[arg(long)]
        estimator: Option<String>,
        /// Monte-carlo sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Seed for the monte-carlo estimator.
        #[arg(long)]
        seed: Option<u64>,
        /// Enumeration budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Log-loss, KL, cross-entropy and total variation between a model and a table.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Model file.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Reference `sequence,prob` CSV; defaults to the corpus's empirical distribution.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Enumeration budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Uniform and geometric fits to a distribution over ages 0..=119.
    AgeExperiment {
        #[command(flatten)]
        common: Common,
        /// One probability per line for ages 0..=119; built-in default if omitted.
        #[arg(long)]
        ages: Option<PathBuf>,
        /// Fit to a sample of this size instead of the distribution itself.
        #[arg(long)]
        samples: Option<usize>,
        /// Seed for `--samples`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every randomized property suite and report the smallest slack of each.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Seed for all suites.
        #[arg(long)]
        seed: Option<u64>,
        /// Test hook: scale every step-wise partition by this factor.
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
}

/// Parses arguments, runs the command, prints errors to stderr and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
