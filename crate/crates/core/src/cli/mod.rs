//! Command-line interface: `rectify`, `sweep`, `train`, `eval` and `toy`.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage or configuration error,
//! 3 no hands found, 4 mesh reconstruction failure, 5 model load failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ProbeKind, RunConfig, MODEL_ROOT_ENV};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_HANDS: i32 = 3;
pub const EXIT_MESH: i32 = 4;
pub const EXIT_MODEL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "handfix", version, about = "Repair malformed hands by depth-controlled inpainting")]
pub struct Cli {
    /// Print the machine-readable result on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rectify the hands of one image.
    Rectify(RectifyArgs),
    /// Rectify one image at several fixed strengths.
    Sweep(SweepArgs),
    /// Fine-tune the control branch on a dataset manifest.
    Train(TrainArgs),
    /// FID, KID and detection confidence between two image directories.
    Eval(EvalArgs),
    /// Glyph-scale models and data.
    #[command(subcommand)]
    Toy(ToyCommand),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file, or a sidecar written by an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory with `base.json` and `control.json` (default: $HANDFIX_MODEL_ROOT).
    #[arg(long)]
    pub model_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Input image. Taken from the sidecar's inputs when `--config` is one.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Hand mask PNG (nonzero = hand); repeat for several hands.
    #[arg(long = "mask")]
    pub masks: Vec<PathBuf>,
    /// Hand mesh (.obj or .json), one per mask in the same order.
    #[arg(long = "mesh")]
    pub meshes: Vec<PathBuf>,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub neg_prompt: Option<String>,
    #[arg(long)]
    pub extra_neg_prompt: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub guidance: Option<f64>,
    /// Mask dilation in pixels.
    #[arg(long)]
    pub dilation: Option<usize>,
    /// Paste the original pixels back outside the hand mask.
    #[arg(long)]
    pub exact_composite: bool,
    /// Control-branch checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub probe: Option<ProbeKind>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, conflicts_with = "adaptive")]
    pub strength: Option<f64>,
    /// Pick the strength by pose error instead of using a fixed value.
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Comma-separated strengths.
    #[arg(long, value_delimiter = ',')]
    pub strengths: Option<Vec<f64>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON-lines manifest of training records.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training crop/resize size in pixels.
    #[arg(long)]
    pub size: Option<u32>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExtractorKind {
    /// Seeded random projection of pooled pixels.
    RandomProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    None,
    Glyph,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ref_dir: Option<PathBuf>,
    #[arg(long)]
    pub gen_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "random-projection")]
    pub extractor: ExtractorKind,
    /// Hand detector for the confidence column (default: none).
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,
    #[arg(long)]
    pub kid_subset_size: Option<usize>,
    #[arg(long)]
    pub kid_subsets: Option<usize>,
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum ToyCommand {
    /// Write a procedural glyph dataset with a manifest.
    GenData(ToyGenArgs),
    /// Train the toy base and control branch end to end.
    Train(ToyTrainArgs),
    /// Structure error of rectified glyphs across strengths.
    DemoSweep(ToySweepArgs),
}

#[derive(Debug, Args)]
pub struct ToyGenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of glyphs (default 100).
    #[arg(long)]
    pub count: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dataset_size: Option<usize>,
    #[arg(long)]
    pub base_steps: Option<usize>,
    #[arg(long)]
    pub control_steps: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ToySweepArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scenarios: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub strengths: Option<Vec<f64>>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoHands => EXIT_NO_HANDS,
        Error::MeshReconstruction { .. } | Error::InvalidMesh(_) => EXIT_MESH,
        Error::ModelLoad { .. } => EXIT_MODEL,
        Error::Config(_) | Error::Strength(_) | Error::InvalidPlan(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
