use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use tckae::eval::{kernel_pca_project, pca_project, Projection2D};
use tckae::{DenseMatrix, KernelMatrix};

use super::{labels, Split};
use crate::{CliResult, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProjectMode {
    /// Linear PCA of a code matrix.
    PcaCodes,
    /// Kernel PCA of a square kernel matrix.
    KpcaKernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Train,
    Test,
}

#[derive(Clone, Debug, Args)]
pub struct ProjectArgs {
    #[arg(long, value_enum)]
    pub mode: ProjectMode,
    /// Codes (N × d) or kernel (N × N) matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Dataset file providing the label column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Which half of the split the rows of --input belong to.
    #[arg(long, value_enum, default_value_t = Side::Test)]
    pub split: Side,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Output matrix: `dims` coordinate columns then the label.
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn project(args: &ProjectArgs) -> CliResult<Projection2D> {
    let split = Split::load(&args.data, args.train_fraction)?;
    let p = run_project(&split, args.mode, &args.input, args.split, args.dims, &args.out)?;
    let ev: Vec<String> = p.explained_variance.iter().map(|v| format!("{v:.6}")).collect();
    println!("explained variance: {}", ev.join(", "));
    Ok(p)
}

pub fn run_project(
    split: &Split,
    mode: ProjectMode,
    input: &Path,
    side: Side,
    dims: usize,
    out: &Path,
) -> CliResult<Projection2D> {
    let y = match side {
        Side::Train => labels(&split.train, "training")?,
        Side::Test => labels(&split.test, "test")?,
    };
    let p = match mode {
        ProjectMode::PcaCodes => {
            let x = DenseMatrix::read_csv(input).stage("project")?;
            pca_project(&x, dims)
        }
        ProjectMode::KpcaKernel => {
            let k = KernelMatrix::read_csv(input).stage("project")?;
            kernel_pca_project(k.as_matrix(), dims)
        }
    }
    .stage("project")?;
    let n = p.coordinates.rows();
    if n != y.len() {
        return Err(tckae::Error::Invalid(format!(
            "{} has {n} rows but the {side:?} split has {} series",
            input.display(),
            y.len()
        )))
        .stage("project");
    }
    let mut table = DenseMatrix::zeros(n, dims + 1);
    for i in 0..n {
        table.row_mut(i)[..dims].copy_from_slice(p.coordinates.row(i));
        table.set(i, dims, f64::from(y[i]));
    }
    table.write_csv(out).stage("project")?;
    Ok(p)
}
