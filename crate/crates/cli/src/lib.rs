//! Command-line front end: corpus cleaning, evaluation, training, search,
//! serving and training curves.

pub mod commands;
pub mod error;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::Failure;

#[derive(Debug, Parser)]
#[command(name = "solace", version, about = "Conversational assistant toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, anonymize and filter raw conversation records.
    Pipeline {
        #[arg(long = "in", value_name = "RAW.jsonl")]
        input: PathBuf,
        #[arg(long = "out", value_name = "CLEAN.jsonl")]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score candidate/reference pairs.
    Eval {
        #[arg(long, value_name = "PAIRS.jsonl")]
        pairs: PathBuf,
        #[arg(long, value_name = "REPORT.json")]
        out: PathBuf,
    },
    /// Fine-tune the bigram model on a cleaned corpus.
    Train {
        #[arg(long, value_name = "CLEAN.jsonl")]
        corpus: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_name = "HISTORY.jsonl")]
        history: PathBuf,
    },
    /// Random hyperparameter search.
    Tune {
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Cleaned corpus; defaults to the synthetic Markov corpus.
        #[arg(long, value_name = "CLEAN.jsonl")]
        corpus: Option<PathBuf>,
    },
    /// Run the chat gateway until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-evaluation metric rows for a finished training run.
    Curves {
        #[arg(long, value_name = "HISTORY.jsonl")]
        history: PathBuf,
        #[arg(long, value_name = "CURVES.csv")]
        out: PathBuf,
    },
}

pub fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Pipeline { input, output, config } => {
            commands::pipeline(&input, &output, config.as_deref())
        }
        Command::Eval { pairs, out } => commands::eval(&pairs, &out),
        Command::Train { corpus, config, history } => commands::train_cmd(&corpus, &config, &history),
        Command::Tune { trials, seed, corpus } => {
            let outcome = commands::tune_cmd(trials, seed, corpus.as_deref())?;
            let text = serde_json::to_string_pretty(&outcome).map_err(Failure::runtime)?;
            println!("{text}");
            Ok(())
        }
        Command::Serve { config } => commands::serve(&config),
        Command::Curves { history, out } => commands::curves(&history, &out),
    }
}
