use std::path::{Path, PathBuf};

use clap::Args;
use tckae::{fit_tck, kernel_matrix, TckConfig};

use super::{files, Split};
use crate::{create_dir, CliResult, Stage};

#[derive(Clone, Debug, Args)]
pub struct TckArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// JSON kernel configuration; fields left out take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Largest number of mixture components.
    #[arg(long)]
    pub components: Option<usize>,
    /// Ensemble members per component count.
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub em_iters: Option<usize>,
    /// Master seed of the ensemble.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit the mixtures on train and test series together.
    #[arg(long)]
    pub transductive: bool,
}

impl TckArgs {
    fn resolve(&self, t: usize, v: usize) -> CliResult<TckConfig> {
        let mut cfg = match &self.config {
            Some(p) => tckae::io::read_json(p).stage("config")?,
            None => TckConfig::for_shape(t, v),
        };
        if let Some(c) = self.components {
            cfg.max_components = c;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(i) = self.em_iters {
            cfg.em_max_iters = i;
        }
        cfg.master_seed = self.seed;
        Ok(cfg)
    }
}

pub fn tck(args: &TckArgs) -> CliResult<()> {
    let split = Split::load(&args.data, args.train_fraction)?;
    let cfg = args.resolve(split.train.time_steps(), split.train.variables())?;
    run_tck(&split, &cfg, args.transductive, &args.out)
}

/// Fit on the standardized split and write the model plus the train×train,
/// test×train and test×test kernels.
pub fn run_tck(split: &Split, cfg: &TckConfig, transductive: bool, out: &Path) -> CliResult<()> {
    create_dir(out)?;
    let fit_on = if transductive {
        split.train.concat(&split.test).stage("tck")?
    } else {
        split.train.clone()
    };
    let model = fit_tck(&fit_on, cfg)
        .stage("tck")?
        .with_standardization(split.stats.clone());
    model.save(&out.join(files::TCK_MODEL)).stage("tck")?;
    let k_train = kernel_matrix(&model, &split.train, &split.train).stage("tck")?;
    k_train.write_csv(&out.join(files::K_TRAIN)).stage("tck")?;
    let k_test_train = kernel_matrix(&model, &split.test, &split.train).stage("tck")?;
    k_test_train.write_csv(&out.join(files::K_TEST_TRAIN)).stage("tck")?;
    let k_test = kernel_matrix(&model, &split.test, &split.test).stage("tck")?;
    k_test.write_csv(&out.join(files::K_TEST)).stage("tck")
}
