//! One function per subcommand. The clap argument structs are thin; the
//! `run_*` functions take resolved configuration so the pipeline can call
//! them directly.

pub mod eval;
mod project;
mod synth;
mod tck;
mod train;

use std::path::Path;

use tckae::{load_dataset, split_train_test, standardize, Standardization, TimeSeriesDataset};

use crate::{CliResult, Stage};

pub use eval::{eval, run_eval, EvalArgs, EvalSource};
pub use project::{project, run_project, ProjectArgs, ProjectMode, Side};
pub use synth::{synth, SynthArgs};
pub use tck::{run_tck, tck, TckArgs};
pub use train::{run_train, train, ImputeArg, TrainArgs, TrainSpec};

/// File names shared between stages.
pub mod files {
    pub const TCK_MODEL: &str = "tck_model.json";
    pub const K_TRAIN: &str = "K_train.csv";
    pub const K_TEST_TRAIN: &str = "K_test_train.csv";
    pub const K_TEST: &str = "K_test.csv";
    pub const CHECKPOINT: &str = "checkpoint.json";
    pub const CODES_TRAIN: &str = "codes_train.csv";
    pub const CODES_TEST: &str = "codes_test.csv";
    pub const HISTORY: &str = "history.csv";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_CSV: &str = "report.csv";
}

/// Raw and standardized halves of a dataset, split by position.
pub struct Split {
    pub train: TimeSeriesDataset,
    pub test: TimeSeriesDataset,
    pub stats: Standardization,
}

impl Split {
    pub fn load(data: &Path, train_fraction: f64) -> CliResult<Split> {
        let ds = load_dataset(data).stage("load")?;
        let (train, test) = split_train_test(&ds, train_fraction).stage("split")?;
        let (train_std, stats) = standardize(&train, &train).stage("standardize")?;
        let test_std = stats.apply(&test).stage("standardize")?;
        Ok(Split {
            train: train_std,
            test: test_std,
            stats,
        })
    }
}

pub(crate) fn labels<'a>(ds: &'a TimeSeriesDataset, what: &str) -> CliResult<&'a [u8]> {
    ds.labels()
        .ok_or_else(|| tckae::Error::Invalid(format!("{what} set has no labels")))
        .stage("labels")
}
