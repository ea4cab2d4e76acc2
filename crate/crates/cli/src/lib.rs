//! `gelsim` command line: scene configs, synthetic datasets and the
//! simulate / calibrate / render / train / evaluate pipeline.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod scene;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

pub use config::{SceneConfig, SCHEMA_VERSION};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gelsim", version, about = "Tactile sensor gel simulation toolkit")]
pub struct Cli {
    /// Scene configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `seeds.run` of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulates the configured indentation and writes per-frame clouds and maps.
    Simulate {
        /// Optical weights; when given, composed camera images are written too.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Idle camera image for composition (default: the synthetic idle frame).
        #[arg(long)]
        idle: Option<PathBuf>,
    },
    /// Identifies Young's modulus and Poisson's ratio from recorded sequences.
    Calibrate {
        /// Directory of sequence subdirectories.
        #[arg(long)]
        sequences: PathBuf,
    },
    /// Re-simulates dataset scenes and predicts camera images and clouds.
    Render {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// calibration_result.json whose parameters replace the configured material.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Scenes to render (default: all).
        #[arg(long, value_enum)]
        split: Option<dataset::Role>,
    },
    /// Trains the optical model on the train split of a dataset.
    TrainOptical {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Compares predicted frames against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Restricts ground truth to one split of its manifest.
        #[arg(long, value_enum)]
        split: Option<dataset::Role>,
    },
    /// Generates a synthetic dataset of random indentations.
    GenSynthetic {
        #[arg(long)]
        scenes: usize,
    },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds.run = seed;
    }
    let out = cli.out.clone().ok_or_else(|| CliError::Input("--out is required".into()))?;
    match cli.command {
        Command::Simulate { weights, idle } => commands::simulate::run(&cfg, &out, weights.as_deref(), idle.as_deref()),
        Command::Calibrate { sequences } => commands::calibrate::run(&cfg, &sequences, &out),
        Command::Render { dataset, weights, calibration, split } => {
            commands::render::run(&cfg, &dataset, &weights, calibration.as_deref(), split, &out)
        }
        Command::TrainOptical { dataset } => commands::train::run(&cfg, &dataset, &out),
        Command::Evaluate { pred, gt, split } => commands::evaluate::run(&cfg, &pred, &gt, split, &out),
        Command::GenSynthetic { scenes } => commands::generate::run(&cfg, scenes, &out),
    }
}

/// Writes a file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
