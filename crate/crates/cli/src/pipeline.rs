//! The full experiment: data, kernel, six autoencoder configurations and the
//! kernel-only baseline, repeated over independent runs, then one aggregate
//! report. Stages hand over through the same files the subcommands use.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tckae::autoencoder::TrainConfig;
use tckae::eval::EvalReport;
use tckae::seed::derive_seed;
use tckae::{generate, save_dataset, SynthConfig, TckConfig};

use crate::commands::{
    self, files, run_eval, run_project, run_tck, run_train, EvalSource, ImputeArg, ProjectMode, Side,
    TrainSpec,
};
use crate::{create_dir, CliResult, Stage};

/// Flat JSON configuration; every field is optional in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Existing dataset to use instead of generating one.
    pub data: Option<PathBuf>,
    /// Generator settings; its seed is replaced by one derived from `seed`.
    pub synth: SynthConfig,
    pub train_fraction: f64,
    pub runs: usize,
    pub seed: u64,
    /// Neighbours for kNN.
    pub k: usize,
    /// Kernel settings; `None` picks defaults for the data shape. The master
    /// seed is derived per run.
    pub tck: Option<TckConfig>,
    pub transductive: bool,
    /// Optimizer settings shared by every network; `lambda` applies to the
    /// aligned variants and the seed is derived per run.
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub code: usize,
    pub imputations: Vec<ImputeArg>,
    /// Extra λ values tried for the aligned network with zero imputation;
    /// written to `sweep.csv`.
    pub lambda_sweep: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: None,
            synth: SynthConfig::default(),
            train_fraction: 0.8,
            runs: 10,
            seed: 0,
            k: 3,
            tck: None,
            transductive: false,
            train: TrainConfig::default(),
            hidden: vec![64],
            code: 32,
            imputations: ImputeArg::ALL.to_vec(),
            lambda_sweep: vec![0.1, 0.25, 0.5, 0.75],
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct PipelineArgs {
    /// JSON config; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Experiment directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of runs (overrides the config).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Dataset file (overrides the config).
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl PipelineArgs {
    pub fn resolve(&self) -> CliResult<PipelineConfig> {
        let mut cfg: PipelineConfig = match &self.config {
            Some(p) => tckae::io::read_json(p).stage("config")?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if cfg.runs == 0 {
            return Err(tckae::Error::Invalid("runs must be at least 1".into())).stage("config");
        }
        if cfg.imputations.is_empty() {
            return Err(tckae::Error::Invalid("no imputation methods configured".into())).stage("config");
        }
        if let Some(d) = &cfg.data {
            if !d.exists() {
                return Err(tckae::Error::Invalid(format!("dataset {} does not exist", d.display())))
                    .stage("config");
            }
        }
        Ok(cfg)
    }
}

/// Aggregate and sweep reports returned by [`run`].
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub reports: Vec<EvalReport>,
    pub sweep: Vec<EvalReport>,
}

pub fn run(args: &PipelineArgs) -> CliResult<PipelineOutput> {
    let cfg = args.resolve()?;
    run_config(&cfg, &args.out)
}

fn network_dir(family: &str, imp: ImputeArg) -> String {
    format!("{family}-{}", imp.tag())
}

fn sweep_dir(lambda: f64) -> String {
    format!("sweep-{lambda}")
}

pub fn run_config(cfg: &PipelineConfig, out: &Path) -> CliResult<PipelineOutput> {
    create_dir(out)?;
    tckae::io::write_json(&out.join("config.json"), cfg).stage("config")?;

    let data = match &cfg.data {
        Some(p) => p.clone(),
        None => {
            let synth = SynthConfig {
                seed: derive_seed(cfg.seed, "synth", 0),
                ..cfg.synth.clone()
            };
            let path = out.join("data.csv");
            let ds = generate(&synth).stage("synth")?;
            save_dataset(&ds, &path).stage("synth")?;
            path
        }
    };
    let split = commands::Split::load(&data, cfg.train_fraction)?;
    let (t, v) = (split.train.time_steps(), split.train.variables());
    let base_tck = cfg.tck.clone().unwrap_or_else(|| TckConfig::for_shape(t, v));

    let run_dirs: Vec<PathBuf> = (0..cfg.runs).map(|r| commands::eval::run_dir(out, r)).collect();
    for (run, dir) in run_dirs.iter().enumerate() {
        let r = run as u64;
        eprintln!("run {}/{}: kernel", run + 1, cfg.runs);
        let tck_cfg = TckConfig {
            master_seed: derive_seed(cfg.seed, "tck", r),
            ..base_tck.clone()
        };
        let tck_dir = dir.join("tck");
        run_tck(&split, &tck_cfg, cfg.transductive, &tck_dir)?;
        let kernel = tck_dir.join(files::K_TRAIN);

        let spec = |impute: ImputeArg, lambda: f64| TrainSpec {
            impute,
            hidden: cfg.hidden.clone(),
            code: cfg.code,
            // the plain and aligned networks of a run start from the same weights
            init_seed: derive_seed(cfg.seed, "ae-init", r),
            config: TrainConfig {
                lambda,
                seed: derive_seed(cfg.seed, "ae-batches", r),
                ..cfg.train.clone()
            },
        };
        for &imp in &cfg.imputations {
            for (family, lambda) in [("ae", 0.0), ("dkae", cfg.train.lambda)] {
                eprintln!("run {}/{}: {}", run + 1, cfg.runs, network_dir(family, imp));
                run_train(&split, &spec(imp, lambda), Some(&kernel), &dir.join(network_dir(family, imp)))?;
            }
        }
        for &lambda in &cfg.lambda_sweep {
            eprintln!("run {}/{}: sweep λ={lambda}", run + 1, cfg.runs);
            run_train(&split, &spec(ImputeArg::Zero, lambda), Some(&kernel), &dir.join(sweep_dir(lambda)))?;
        }
    }

    let proj = out.join("projections");
    create_dir(&proj)?;
    let first = &run_dirs[0];
    run_project(
        &split,
        ProjectMode::KpcaKernel,
        &first.join("tck").join(files::K_TEST),
        Side::Test,
        2,
        &proj.join("kpca_tck.csv"),
    )?;
    for &imp in &cfg.imputations {
        for family in ["ae", "dkae"] {
            let name = network_dir(family, imp);
            run_project(
                &split,
                ProjectMode::PcaCodes,
                &first.join(&name).join(files::CODES_TEST),
                Side::Test,
                2,
                &proj.join(format!("pca_{name}.csv")),
            )?;
        }
    }

    let in_runs = |sub: &str| -> Vec<PathBuf> { run_dirs.iter().map(|d| d.join(sub)).collect() };
    let mut reports = Vec::new();
    for &imp in &cfg.imputations {
        for (family, label) in [("ae", "AE"), ("dkae", "dkAE")] {
            let name = format!("{label}-{}", imp.tag());
            reports.push(run_eval(
                &split,
                &in_runs(&network_dir(family, imp)),
                EvalSource::Codes,
                Some(&name),
                cfg.k,
            )?);
        }
    }
    reports.push(run_eval(&split, &in_runs("tck"), EvalSource::Kernel, Some("TCK-i"), cfg.k)?);
    commands::eval::write_reports(&reports, out)?;

    let mut sweep = Vec::new();
    for &lambda in &cfg.lambda_sweep {
        let name = format!("dkAE-z@{lambda}");
        sweep.push(run_eval(&split, &in_runs(&sweep_dir(lambda)), EvalSource::Codes, Some(&name), cfg.k)?);
    }
    if !sweep.is_empty() {
        tckae::io::write_atomic(&out.join("sweep.csv"), EvalReport::table_csv(&sweep).as_bytes())
            .stage("report")?;
    }
    Ok(PipelineOutput { reports, sweep })
}
