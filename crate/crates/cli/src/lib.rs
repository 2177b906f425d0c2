//! Command-line pipeline: synthesize data, fit the kernel, train
//! autoencoders, evaluate and project. Every stage reads and writes plain
//! files so runs can be resumed or inspected between steps.

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod pipeline;

pub use commands::{EvalArgs, ProjectArgs, ProjectMode, SynthArgs, TckArgs, TrainArgs};
pub use pipeline::{PipelineArgs, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "tckae", version, about = "Kernel-aligned autoencoders for time series with missing values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic dataset.
    Synth(SynthArgs),
    /// Fit the time series cluster kernel and write kernel matrices.
    Tck(TckArgs),
    /// Train an autoencoder (λ = 0) or a kernel-aligned one (λ > 0).
    Train(TrainArgs),
    /// kNN classification report from codes or from a kernel.
    Eval(EvalArgs),
    /// Two-dimensional PCA / kernel PCA coordinates.
    Project(ProjectArgs),
    /// Run the whole experiment from one config file and seed.
    Pipeline(PipelineArgs),
}

/// A library error tagged with the stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub source: tckae::Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.source)
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl CliError {
    /// 3 for numerical failures, 2 for everything data related.
    pub fn exit_code(&self) -> u8 {
        match self.source {
            tckae::Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attach a stage name to library errors.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T> Stage<T> for tckae::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|source| CliError {
            stage: stage.to_string(),
            source,
        })
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => commands::synth(&a),
        Command::Tck(a) => commands::tck(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a).map(|_| ()),
        Command::Project(a) => commands::project(&a).map(|_| ()),
        Command::Pipeline(a) => pipeline::run(&a).map(|_| ()),
    }
}

/// Parse `args` and run; returns the process exit code (0 ok, 1 usage,
/// 2 data or format error, 3 numerical failure).
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| tckae::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
        .stage("output")
}
