use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qsnn", version, about = "Train and compare quantum stochastic neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mean loss curves of every model on the two-pair task.
    Accelerate(CommonArgs),
    /// Test-sequence accuracy curves on the verse corpus.
    Verse(VerseArgs),
    /// Training on flipped labels that are corrected mid-run.
    LabelNoise(LabelNoiseArgs),
    /// Robustness against output-rate noise during training.
    Robustness(CommonArgs),
    /// One seeded training run; writes a history and a parameter file.
    Train(CommonArgs),
    /// Output probabilities of a saved model on a dataset.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Coherent,
    Incoherent,
    Classical,
    All,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Training set (JSON). Defaults to the shipped corpus of the subcommand.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Shipped corpus to use when no dataset file is given.
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated initial coherent strengths, one coherent model each.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub h_init: Vec<f64>,
    /// uniform:LOW:HIGH, const:V or grid:V1,V2,...
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_init: Option<String>,
    #[arg(long)]
    pub t_in: Option<f64>,
    #[arg(long)]
    pub t_u: Option<f64>,
    #[arg(long)]
    pub t_d: Option<f64>,
    #[arg(long)]
    pub gamma_in: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Test set (JSON); required together with --dataset.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct LabelNoiseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training set with flipped labels; required together with --dataset.
    #[arg(long)]
    pub corrupted: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub correct_at: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<String>,
    /// Also write eval.csv into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
