//! Command-line interface.

mod commands;
mod molecule;

pub use commands::{ExplainBundle, FeatureRecord, GatRow, RunManifest};
pub use molecule::random_smiles;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::SplitMethod;
use crate::model::{ModelConfig, NormKind, Streams, TaskType};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mlfgnn", version, about = "Multi-level fusion GNN for molecular property prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write atom, bond and fingerprint features for every row of a CSV.
    Featurize(FeaturizeArgs),
    /// Train one model per seed and write checkpoints, logs and a report.
    Train(TrainArgs),
    /// Predict every row of a CSV with a trained checkpoint.
    Predict(PredictArgs),
    /// Export attention weights and gates for one molecule.
    Explain(ExplainArgs),
    /// Finite-difference check of the full model on a random molecule.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    GatOnly,
    TransformerOnly,
    NoFp,
    Layernorm,
    NoAdjacency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Cls,
    Reg,
}

impl From<TaskArg> for TaskType {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Cls => TaskType::Classification,
            TaskArg::Reg => TaskType::Regression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Random,
    Scaffold,
}

impl From<SplitArg> for SplitMethod {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Random => SplitMethod::Random,
            SplitArg::Scaffold => SplitMethod::Scaffold,
        }
    }
}

pub fn apply_ablations(config: &mut ModelConfig, ablations: &[Ablation]) {
    for a in ablations {
        match a {
            Ablation::GatOnly => config.streams = Streams::GatOnly,
            Ablation::TransformerOnly => config.streams = Streams::TransformerOnly,
            Ablation::NoFp => config.use_fingerprint = false,
            Ablation::Layernorm => config.norm = NormKind::LayerNorm,
            Ablation::NoAdjacency => config.use_adjacency = false,
        }
    }
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file, one JSON object per input row.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset of morgan,keys,erg.
    #[arg(long, default_value = "morgan,keys,erg")]
    pub fingerprints: String,
    #[arg(long, default_value = "smiles")]
    pub smiles_column: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, value_enum, default_value = "random")]
    pub split: SplitArg,
    /// key=value file with model and training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train seeds 0..k. Overrides `seeds` in the config file.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `epochs` in the config file.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub ablate: Vec<Ablation>,
    #[arg(long, default_value = "smiles")]
    pub smiles_column: String,
    /// Label columns; defaults to every column but the SMILES one.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Config the checkpoint must have been trained with.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Load even if the config digest does not match.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value = "smiles")]
    pub smiles_column: String,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub smiles: String,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub atoms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub ablate: Vec<Ablation>,
    /// Coordinates checked per parameter tensor; 0 checks all of them.
    #[arg(long, default_value_t = 24)]
    pub max_coords: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub rtol: f64,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Verification(m) => m,
        }
    }
}

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Featurize(a) => commands::featurize(&a),
        Command::Train(a) => commands::train(&a, argv),
        Command::Predict(a) => commands::predict(&a),
        Command::Explain(a) => commands::explain(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
