use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "voxsource", version, about = "Natural vs loudspeaker-emitted speech classification")]
pub struct Cli {
    /// key=value file supplying defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic natural/emitted corpus with a manifest
    Synth(SynthArgs),
    /// Compute MFCC or CQCC features for every manifest segment
    Extract(ExtractArgs),
    /// Train an MLP or GMM classifier
    Train(TrainArgs),
    /// Score a trained model on one split
    Eval(EvalArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Extract(_) => "extract",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub speakers: usize,
    #[arg(long, default_value_t = 6)]
    pub clips: usize,
    /// Clip length in seconds
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
    /// One channel per line: `low=.. high=.. order=.. drive=.. rt60=.. direct=.. snr=.. seed=..`
    #[arg(long)]
    pub channels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalFeature {
    Mfcc,
    Cqcc,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub feature: SignalFeature,
    #[arg(long)]
    pub out: PathBuf,
    /// Fit a K-component PCA on the train split and project every segment
    #[arg(long, value_name = "K")]
    pub pca: Option<usize>,
    /// With --pca, save the fitted projection here; without, load and apply it
    #[arg(long, value_name = "FILE")]
    pub pca_model: Option<PathBuf>,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Mlp,
    Gmm,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature files, comma-separated; fused in the fixed order vggish, soundnet, cqcc, mfcc
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelChoice::Mlp)]
    pub model: ModelChoice,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid file for k-fold cross-validated search over MLP settings
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Hidden layer widths, e.g. `100` or `100x50`
    #[arg(long, default_value = "100")]
    pub hidden: String,
    #[arg(long, default_value_t = 0.00005)]
    pub lr: f64,
    #[arg(long, default_value_t = 5000)]
    pub batch: usize,
    #[arg(long, default_value = "adam")]
    pub optimizer: String,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Weight the loss by inverse class frequency
    #[arg(long)]
    pub class_weighting: bool,
    /// GMM components per class
    #[arg(long, default_value_t = 512)]
    pub components: usize,
    #[arg(long, default_value_t = 100)]
    pub gmm_iterations: usize,
    /// Feed features unscaled instead of scaling to unit mean square
    #[arg(long)]
    pub no_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid-search worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
}
