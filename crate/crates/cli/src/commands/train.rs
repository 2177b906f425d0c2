use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tckae::autoencoder::{init_network, train_with, Checkpoint, TrainConfig};
use tckae::seed::derive_seed;
use tckae::{flatten, impute, ImputationMethod, KernelMatrix, TimeSeriesDataset};

use super::{files, Split};
use crate::{create_dir, CliResult, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeArg {
    Zero,
    Mean,
    Locf,
}

impl ImputeArg {
    pub const ALL: [ImputeArg; 3] = [ImputeArg::Zero, ImputeArg::Mean, ImputeArg::Locf];

    pub(crate) fn method(self, train: &TimeSeriesDataset) -> tckae::Result<ImputationMethod> {
        match self {
            ImputeArg::Zero => Ok(ImputationMethod::Zero),
            ImputeArg::Mean => ImputationMethod::mean_from(train),
            ImputeArg::Locf => Ok(ImputationMethod::Locf),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ImputeArg::Zero => "z",
            ImputeArg::Mean => "m",
            ImputeArg::Locf => "l",
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct TrainArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Train×train prior kernel; required when λ > 0.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Weight of the kernel alignment term, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = ImputeArg::Zero)]
    pub impute: ImputeArg,
    /// Encoder hidden layer sizes, comma separated; the decoder mirrors them.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
    /// Code dimension.
    #[arg(long, default_value_t = 32)]
    pub code: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Everything `run_train` needs besides the data.
#[derive(Clone, Debug)]
pub struct TrainSpec {
    pub impute: ImputeArg,
    pub hidden: Vec<usize>,
    pub code: usize,
    /// Seeds the weight initialization; batch order uses `config.seed`.
    pub init_seed: u64,
    pub config: TrainConfig,
}

impl TrainSpec {
    pub fn layer_sizes(&self, d_in: usize) -> Vec<usize> {
        let mut sizes = vec![d_in];
        sizes.extend(&self.hidden);
        sizes.push(self.code);
        sizes.extend(self.hidden.iter().rev());
        sizes.push(d_in);
        sizes
    }
}

impl TrainArgs {
    pub fn spec(&self) -> TrainSpec {
        TrainSpec {
            impute: self.impute,
            hidden: self.hidden.clone(),
            code: self.code,
            init_seed: derive_seed(self.seed, "ae-init", 0),
            config: TrainConfig {
                lambda: self.lambda,
                batch_size: self.batch_size,
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                seed: derive_seed(self.seed, "ae-batches", 0),
                ..TrainConfig::default()
            },
        }
    }
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let split = Split::load(&args.data, args.train_fraction)?;
    run_train(&split, &args.spec(), args.kernel.as_deref(), &args.out)
}

/// Train on the standardized split and write the checkpoint, codes of both
/// halves and the loss history. The kernel file is not opened when λ = 0.
pub fn run_train(split: &Split, spec: &TrainSpec, kernel: Option<&Path>, out: &Path) -> CliResult<()> {
    let kernel = match (spec.config.lambda > 0.0, kernel) {
        (false, _) => None,
        (true, Some(p)) => Some(KernelMatrix::read_csv(p).stage("train")?),
        (true, None) => {
            return Err(tckae::Error::Invalid("lambda > 0 needs --kernel".into())).stage("train");
        }
    };
    create_dir(out)?;
    let method = spec.impute.method(&split.train).stage("impute")?;
    let x_train = flatten(&impute(&split.train, &method).stage("impute")?).stage("impute")?;
    let x_test = flatten(&impute(&split.test, &method).stage("impute")?).stage("impute")?;

    let ae = init_network(&spec.layer_sizes(x_train.cols()), spec.init_seed).stage("train")?;
    let (ae, history) =
        train_with(&ae, &x_train, kernel.as_ref(), Some(&x_test), &spec.config, |_| {}).stage("train")?;

    ae.encode(&x_train)
        .and_then(|c| c.write_csv(&out.join(files::CODES_TRAIN)))
        .stage("train")?;
    ae.encode(&x_test)
        .and_then(|c| c.write_csv(&out.join(files::CODES_TEST)))
        .stage("train")?;
    tckae::io::write_atomic(&out.join(files::HISTORY), history.to_csv_string().as_bytes()).stage("train")?;
    Checkpoint {
        model: ae,
        train_config: spec.config.clone(),
        standardization: Some(split.stats.clone()),
        imputation: Some(method),
        history: Some(history),
    }
    .save(&out.join(files::CHECKPOINT))
    .stage("train")
}
