use std::path::{Path, PathBuf};

use clap::Args;
use tckae::autoencoder::Checkpoint;
use tckae::eval::{auc_roc, f1_score, knn_classify, mse, EvalReport, Neighbors, RunMetrics};
use tckae::{flatten, impute, DenseMatrix, KernelMatrix};

use super::{files, labels, Split};
use crate::{create_dir, CliResult, Stage};

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    /// Dataset file the runs were trained on (labels come from here).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Run directory; repeat for several runs.
    #[arg(long = "dir", required = true)]
    pub dirs: Vec<PathBuf>,
    /// Treat the single --dir as a parent of run_000 .. run_{R-1}.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Sub-directory inside each run directory.
    #[arg(long)]
    pub subdir: Option<String>,
    /// Classify with the test×train kernel instead of codes.
    #[arg(long)]
    pub tck_input: bool,
    /// Row label in the report; inferred when omitted.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(short, default_value_t = 3)]
    pub k: usize,
    /// Output directory for report.json and report.csv.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSource {
    /// `codes_train.csv` / `codes_test.csv` with Euclidean neighbours.
    Codes,
    /// `K_test_train.csv` with similarity neighbours.
    Kernel,
}

pub fn run_dir(parent: &Path, run: usize) -> PathBuf {
    parent.join(format!("run_{run:03}"))
}

impl EvalArgs {
    fn resolved_dirs(&self) -> CliResult<Vec<PathBuf>> {
        let base: Vec<PathBuf> = match self.runs {
            None => self.dirs.clone(),
            Some(r) => {
                if self.dirs.len() != 1 || r == 0 {
                    return Err(tckae::Error::Invalid(
                        "--runs needs exactly one --dir and R >= 1".into(),
                    ))
                    .stage("eval");
                }
                (0..r).map(|i| run_dir(&self.dirs[0], i)).collect()
            }
        };
        Ok(match &self.subdir {
            Some(s) => base.into_iter().map(|d| d.join(s)).collect(),
            None => base,
        })
    }
}

pub fn eval(args: &EvalArgs) -> CliResult<EvalReport> {
    let split = Split::load(&args.data, args.train_fraction)?;
    let source = if args.tck_input {
        EvalSource::Kernel
    } else {
        EvalSource::Codes
    };
    let dirs = args.resolved_dirs()?;
    let report = run_eval(&split, &dirs, source, args.method.as_deref(), args.k)?;
    write_reports(std::slice::from_ref(&report), &args.out)?;
    Ok(report)
}

/// Metrics of one method aggregated over `dirs` (one per run).
pub fn run_eval(
    split: &Split,
    dirs: &[PathBuf],
    source: EvalSource,
    method: Option<&str>,
    k: usize,
) -> CliResult<EvalReport> {
    let y_train = labels(&split.train, "training")?;
    let y_test = labels(&split.test, "test")?;
    let mut runs = Vec::with_capacity(dirs.len());
    let mut inferred = None;
    for dir in dirs {
        let (pred, mse) = match source {
            EvalSource::Kernel => {
                let k_tt = KernelMatrix::read_csv(&dir.join(files::K_TEST_TRAIN)).stage("eval")?;
                let p = knn_classify(Neighbors::Similarity(k_tt.as_matrix()), y_train, k).stage("eval")?;
                (p, None)
            }
            EvalSource::Codes => {
                let train = DenseMatrix::read_csv(&dir.join(files::CODES_TRAIN)).stage("eval")?;
                let test = DenseMatrix::read_csv(&dir.join(files::CODES_TEST)).stage("eval")?;
                let p = knn_classify(
                    Neighbors::Euclidean {
                        train: &train,
                        test: &test,
                    },
                    y_train,
                    k,
                )
                .stage("eval")?;
                let ckpt = dir.join(files::CHECKPOINT);
                let mse = if ckpt.exists() {
                    let c = Checkpoint::load(&ckpt).stage("eval")?;
                    inferred.get_or_insert_with(|| checkpoint_method(&c));
                    Some(test_mse(split, &c).stage("eval")?)
                } else {
                    None
                };
                (p, mse)
            }
        };
        runs.push(RunMetrics {
            mse,
            f1: f1_score(y_test, &pred.labels).stage("eval")?,
            auc: auc_roc(y_test, &pred.scores).stage("eval")?,
        });
    }
    let name = match (method, source) {
        (Some(m), _) => m.to_string(),
        (None, EvalSource::Kernel) => "TCK-i".to_string(),
        (None, EvalSource::Codes) => inferred.unwrap_or_else(|| "codes".to_string()),
    };
    Ok(EvalReport::from_runs(name, &runs))
}

fn checkpoint_method(c: &Checkpoint) -> String {
    let family = if c.train_config.lambda > 0.0 { "dkAE" } else { "AE" };
    match &c.imputation {
        Some(m) => format!("{family}-{}", m.short_tag()),
        None => family.to_string(),
    }
}

/// Test-set reconstruction error using the checkpoint's own imputation.
fn test_mse(split: &Split, c: &Checkpoint) -> tckae::Result<f64> {
    let method = c
        .imputation
        .as_ref()
        .ok_or_else(|| tckae::Error::Format("checkpoint has no imputation method".into()))?;
    let x = flatten(&impute(&split.test, method)?)?;
    mse(&x, &c.model.reconstruct(&x)?)
}

pub fn write_reports(reports: &[EvalReport], out: &Path) -> CliResult<()> {
    create_dir(out)?;
    tckae::io::write_json(&out.join(files::REPORT_JSON), &reports).stage("report")?;
    tckae::io::write_atomic(
        &out.join(files::REPORT_CSV),
        EvalReport::table_csv(reports).as_bytes(),
    )
    .stage("report")
}
