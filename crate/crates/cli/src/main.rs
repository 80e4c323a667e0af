//! `quantsent` command-line tool.
//!
//! Each pipeline stage has its own subcommand: `extract` prints change events,
//! `classify` scores them, `evaluate` compares sentence labels with a gold
//! file and `kb validate` checks a knowledge base. Every flag also reads a
//! `QUANTSENT_*` environment variable.

mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "quantsent", version, about = "Implicit sentiment in quantitative medical sentences")]
struct Cli {
    #[command(flatten)]
    options: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Options {
    /// Directory holding terms.tsv, verbs.tsv, drugs.tsv, units.tsv and modality.tsv.
    #[arg(long, global = true, env = "QUANTSENT_LEXICONS", value_name = "DIR")]
    pub lexicons: Option<PathBuf>,
    /// Knowledge-base variables file.
    #[arg(long, global = true, env = "QUANTSENT_KB_VARS", value_name = "FILE")]
    pub kb_vars: Option<PathBuf>,
    /// Knowledge-base rules file.
    #[arg(long, global = true, env = "QUANTSENT_KB_RULES", value_name = "FILE")]
    pub kb_rules: Option<PathBuf>,
    /// Reviews, one per line: JSON objects or plain text. Defaults to stdin.
    #[arg(long, global = true, env = "QUANTSENT_INPUT", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long, global = true, env = "QUANTSENT_OUTPUT", value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, env = "QUANTSENT_FORMAT", value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Report one majority label per sentence instead of one per event.
    #[arg(long, global = true, env = "QUANTSENT_FUSE")]
    pub fuse: bool,
    /// Sample points used to defuzzify the output variable.
    #[arg(
        long,
        global = true,
        env = "QUANTSENT_GRID_POINTS",
        default_value_t = quantsent::fuzzy::DEFAULT_GRID_POINTS as u64,
        value_parser = clap::value_parser!(u64).range(2..)
    )]
    pub grid_points: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "QUANTSENT_JOBS", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// One JSON record per line.
    #[value(alias = "jsonl", alias = "json")]
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the change events found in each review.
    Extract,
    /// Classify every change event.
    Classify,
    /// Score sentence labels against a gold file.
    Evaluate {
        #[arg(long, env = "QUANTSENT_GOLD", value_name = "FILE")]
        gold: PathBuf,
        /// Output of `classify --format structured`; when absent the input is classified first.
        #[arg(long, env = "QUANTSENT_PREDICTIONS", value_name = "FILE")]
        predictions: Option<PathBuf>,
    },
    /// Knowledge-base tools.
    Kb {
        #[command(subcommand)]
        action: KbCommand,
    },
}

#[derive(Debug, Subcommand)]
enum KbCommand {
    /// List diagnostics; fails if any has error severity.
    Validate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract => run::extract(&cli.options),
        Command::Classify => run::classify(&cli.options),
        Command::Evaluate { gold, predictions } => run::evaluate(&cli.options, &gold, predictions.as_deref()),
        Command::Kb { action: KbCommand::Validate } => run::kb_validate(&cli.options),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("quantsent: {e}");
            e.exit_code()
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}
