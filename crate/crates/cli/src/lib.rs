//! Argument definitions and command implementations for the `fmsense`
//! binary.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{run, CliError};

pub const OUT_ROOT_ENV: &str = "FMSENSE_OUT_ROOT";

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "fmsense", version, about = "Fidgety-movement classification experiments from pressure mat, IMU and video data")]
pub struct Cli {
    /// Worker threads for parallel jobs (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Master seed; every random stream is derived from it
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Root directory for relative output paths
    #[arg(long, global = true, env = OUT_ROOT_ENV, value_name = "DIR")]
    pub out_root: Option<PathBuf>,

    /// Log progress (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and write it to disk
    Synth(SynthArgs),
    /// Compute feature matrices for every snippet of a dataset
    Preprocess(PreprocessArgs),
    /// Train one network on a whole dataset and save a checkpoint
    Train(TrainArgs),
    /// Run subject-grouped cross-validation and write a report
    Crossval(CrossvalArgs),
    /// Grid-search architectures on held-out tuning subjects
    Tune(TuneArgs),
    /// Render a saved cross-validation report
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FusionArg {
    None,
    Late,
    Early,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of subjects
    #[arg(long, default_value_t = 12)]
    pub subjects: usize,

    /// Snippets per subject
    #[arg(long, default_value_t = 20)]
    pub per_subject: usize,

    /// Fraction of FM+ snippets per subject, in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    pub class_balance: f64,

    /// Class signal strength, in [0, 1]
    #[arg(long, default_value_t = 1.0)]
    pub separability: f64,

    /// Per-modality amplitude jitter making classes overlap, in [0, 1]
    #[arg(long, default_value_t = 0.0)]
    pub signal_overlap: f64,

    /// Modalities to generate, comma-separated (mat, imu, vid)
    #[arg(long, value_delimiter = ',', default_value = "mat,imu,vid")]
    pub modality: Vec<String>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Feature sets to compute, comma-separated (mat, imu, vid, fused)
    #[arg(long, value_delimiter = ',', default_value = "mat,imu,vid")]
    pub modality: Vec<String>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Network input: mat, imu, vid or fused
    #[arg(long)]
    pub modality: String,

    /// Architecture preset such as vid-1 (default: first preset of the modality)
    #[arg(long)]
    pub preset: Option<String>,

    /// Training runs; the one with the lowest validation loss is kept
    #[arg(long, default_value_t = 1)]
    pub reps: usize,

    /// Maximum training epochs
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,

    /// Early-stopping patience in epochs
    #[arg(long, default_value_t = 10)]
    pub patience: usize,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Sensor modalities, comma-separated (mat, imu, vid)
    #[arg(long, value_delimiter = ',')]
    pub modality: Vec<String>,

    /// Fusion mode
    #[arg(long, value_enum, default_value_t = FusionArg::None)]
    pub fusion: FusionArg,

    /// Number of subject-grouped folds
    #[arg(long, default_value_t = 9)]
    pub folds: usize,

    /// Training repetitions per network and fold
    #[arg(long, default_value_t = 20)]
    pub reps: usize,

    /// Architecture presets, comma-separated, at most one per network (default: first preset of each)
    #[arg(long, value_delimiter = ',')]
    pub preset: Vec<String>,

    /// Maximum training epochs
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,

    /// Early-stopping patience in epochs
    #[arg(long, default_value_t = 10)]
    pub patience: usize,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,

    /// Network input: mat, imu, vid or fused
    #[arg(long)]
    pub modality: String,

    /// Subjects reserved for tuning, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub holdout_subjects: Vec<String>,

    /// Cross-validation subjects that must not be used for tuning, comma-separated (default: all other subjects)
    #[arg(long, value_delimiter = ',')]
    pub cv_subjects: Vec<String>,

    /// Evaluate this many randomly chosen architectures instead of all 4800
    #[arg(long)]
    pub budget: Option<usize>,

    /// Training runs per architecture
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    /// Number of ranked architectures to keep
    #[arg(long, default_value_t = 10)]
    pub top: usize,

    /// Maximum training epochs
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report file written by crossval (report.json)
    #[arg(long)]
    pub input: PathBuf,

    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,

    /// Write to this file instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}
