//! `socketvib`: simulate impacts on prosthetic hands, process socket signals,
//! train and evaluate the finger classifier, and report transmission trends.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use socketvib::signal::ReductionMethod;
use socketvib::sim::{HandArchetype, ImpactMode};

use run::Run;

#[derive(Parser, Debug)]
#[command(name = "socketvib", version, about = "Impact vibration transmission and finger-contact recognition toolkit")]
pub struct Cli {
    /// Base seed for every stochastic stage.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// key=value file with sections impactor.*, pipeline.*, network.*,
    /// train.* and search.*; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory; receives the results and one manifest.txt.
    #[arg(long, global = true, env = "SOCKETVIB_OUT", default_value = "socketvib-out", value_name = "DIR")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_hand(s: &str) -> Result<HandArchetype, String> {
    s.parse().map_err(|e: socketvib::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<ImpactMode, String> {
    s.parse().map_err(|e: socketvib::Error| e.to_string())
}

fn parse_reduction(s: &str) -> Result<ReductionMethod, String> {
    s.parse().map_err(|e: socketvib::Error| e.to_string())
}

#[derive(Args, Debug, Clone)]
pub struct ImpactArgs {
    /// Impactor: hammer or pendulum.
    #[arg(long, value_parser = parse_mode)]
    pub impactor: Option<ImpactMode>,

    /// Disable the per-impact speed and direction jitter.
    #[arg(long)]
    pub no_jitter: bool,

    /// Disable sensor noise.
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// One-dimensional reduction: dft321 or pca.
    #[arg(long, value_parser = parse_reduction)]
    pub reduction: Option<ReductionMethod>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate impacts on every finger of one hand and store the raw traces.
    Simulate {
        /// Hand archetype: CH (cosmetic), VP (VariPlus), IL (I-Limb) or SH (SoftHand).
        #[arg(long, value_parser = parse_hand)]
        hand: HandArchetype,
        /// Impacts per finger.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[command(flatten)]
        impact: ImpactArgs,
    },
    /// Process a simulation archive: per-impact and per-finger socket energies.
    Pipeline {
        #[arg(long, value_name = "FILE")]
        archive: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Build a labelled dataset, from a simulation archive or by simulating.
    Dataset {
        /// Simulate this hand (ignored when --archive is given).
        #[arg(long, value_parser = parse_hand, required_unless_present = "archive")]
        hand: Option<HandArchetype>,
        #[arg(long, value_name = "FILE")]
        archive: Option<PathBuf>,
        /// Impacts per finger when simulating.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[command(flatten)]
        impact: ImpactArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Stratified train/validation/test split of a dataset.
    Split {
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Train, validation and test fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
        fractions: Vec<f64>,
    },
    /// Train the classifier.
    ///
    /// Without flags the settings of the training set's hand are used. The
    /// per-hand settings tuned in the reference study are
    /// CH: learning rate 0.0016, 168 epochs, 37 dense units, 40 LSTM units, batch 32;
    /// VP: 0.0011, 68 epochs, 40 dense, 40 LSTM, batch 64;
    /// IL: 0.0027, 185 epochs, 21 dense, 39 LSTM, batch 64;
    /// SH: 0.0033, 82 epochs, 18 dense, 39 LSTM, batch 64.
    #[command(verbatim_doc_comment)]
    Train {
        #[arg(long, value_name = "FILE")]
        train: PathBuf,
        #[arg(long, value_name = "FILE")]
        val: PathBuf,
        /// Start from the tuned settings of this hand.
        #[arg(long, value_parser = parse_hand)]
        preset: Option<HandArchetype>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        dense: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Evaluate a model on a held-out split; refuses data used for training.
    Eval {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        test: PathBuf,
    },
    /// Seeded random hyperparameter search maximizing validation accuracy.
    Search {
        #[arg(long, value_name = "FILE")]
        train: PathBuf,
        #[arg(long, value_name = "FILE")]
        val: PathBuf,
        /// Number of trials.
        #[arg(long, default_value_t = 20)]
        budget: usize,
        /// Run trials in parallel (same result as serial).
        #[arg(long)]
        parallel: bool,
    },
    /// Energy of each socket sensor for four hands, ranked against perception.
    ///
    /// Needs one simulation archive per hand. Mean socket energies are ranked
    /// against the contact-cue recognition accuracies of a prosthesis user
    /// reported in the reference study: CH 58%, VP 52%, IL 45%, SH 37%
    /// (chance level 20%).
    #[command(verbatim_doc_comment)]
    TransmissionReport {
        /// Simulation archives, one per hand.
        #[arg(long = "archive", value_name = "FILE", required = true)]
        archives: Vec<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Pipeline { .. } => "pipeline",
            Command::Dataset { .. } => "dataset",
            Command::Split { .. } => "split",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Search { .. } => "search",
            Command::TransmissionReport { .. } => "transmission-report",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Run::new(cli.command.name(), cli.out.clone(), cli.seed, cli.config.as_deref())
        .and_then(|run| commands::execute(cli.command, run));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
