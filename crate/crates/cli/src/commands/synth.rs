use std::path::PathBuf;

use clap::Args;
use tckae::{generate, save_dataset, SynthConfig};

use crate::{CliResult, Stage};

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub t: usize,
    #[arg(long, default_value_t = 10)]
    pub v: usize,
    /// Expected fraction of positive series.
    #[arg(long, default_value_t = 0.5)]
    pub balance: f64,
    /// Gap between the classes' stationary levels.
    #[arg(long, default_value_t = 0.5)]
    pub separation: f64,
    /// Overall fraction of missing cells.
    #[arg(long, default_value_t = 0.5)]
    pub missing: f64,
    /// How strongly missing rates depend on the class, in [0, 1].
    #[arg(long, default_value_t = 0.8)]
    pub informative: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset file.
    #[arg(short, long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            n: self.n,
            t: self.t,
            v: self.v,
            class_balance: self.balance,
            separation: self.separation,
            missing_rate: self.missing,
            informative_missingness: self.informative,
            noise_std: self.noise,
            seed: self.seed,
            ..SynthConfig::default()
        }
    }
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let ds = generate(&args.config()).stage("synth")?;
    save_dataset(&ds, &args.out).stage("synth")
}
