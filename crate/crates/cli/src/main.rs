//! `ancestral`: simulate, featurize, train, predict and evaluate ancestral
//! causal relations, and run the seeded experiment protocols.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ancestral", version, about = "Supervised ancestral causal learning")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; also the default location of stage inputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured learners: l1, nn, pearson or kendall.
    #[arg(long, global = true)]
    learner: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one repetition: data, SCM, ground truth and a T/Q split.
    Simulate {
        /// Number of observed variables (first configured value by default).
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Histogram and PCA features for every ordered pair of a data file.
    Featurize {
        /// Data CSV (default `<out>/data.csv`).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit a classifier on the labeled training pairs.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        pca: Option<PathBuf>,
        /// Labeled pair table (default `<out>/train.csv`).
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Score the query pairs and assemble the ancestral graph.
    Predict {
        /// Model file (default `<out>/model.bin`); unused for correlation learners.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Unlabeled pair table (default `<out>/query.csv`).
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Labeled pairs copied into the graph (default `<out>/train.csv` if present).
        #[arg(long)]
        background: Option<PathBuf>,
    },
    /// AUC and ROC of a graph's predicted entries against labeled pairs.
    Eval {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Labeled pair table (default `<out>/truth.csv`).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the configured experiment protocol over all repetitions.
    Experiment,
    /// Per-stage wall-clock table over the configured p list.
    Timing,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_CONFIG } else { 0 });
        }
    };
    match commands::run(cli.common, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
