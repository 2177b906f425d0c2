use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::matrix::DenseMatrix;

/// Coordinates of `N` samples on the leading components.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection2D {
    /// `N × dims`.
    pub coordinates: DenseMatrix,
    /// Variance captured by each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

/// Eigenpairs sorted by decreasing eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // ties keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Flip `v` so that its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).map_or(false, |&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Linear PCA: center the columns and project onto the top `dims`
/// eigenvectors of the sample covariance (divisor `N − 1`). Each loading
/// vector is signed so its largest-magnitude entry is positive.
pub fn pca_project(x: &DenseMatrix, dims: usize) -> Result<Projection2D> {
    let (n, d) = x.shape();
    if dims == 0 || n < 2 || dims > (n - 1).min(d) {
        return Err(invalid!(
            "cannot extract {dims} components from {n} samples of dimension {d}"
        ));
    }
    let mut centered = x.to_nalgebra();
    for j in 0..d {
        let mean = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let (values, vectors) = sorted_eigen(cov);
    let mut coords = DenseMatrix::zeros(n, dims);
    let mut explained = Vec::with_capacity(dims);
    for c in 0..dims {
        let mut loading: Vec<f64> = vectors.column(c).iter().copied().collect();
        fix_sign(&mut loading);
        for i in 0..n {
            let v: f64 = centered.row(i).iter().zip(&loading).map(|(a, b)| a * b).sum();
            coords.set(i, c, v);
        }
        explained.push(values[c].max(0.0));
    }
    Ok(Projection2D {
        coordinates: coords,
        explained_variance: explained,
    })
}

/// Kernel PCA: double-center `K`, eigendecompose and scale eigenvectors by
/// the square roots of their eigenvalues (tiny negatives clamped to 0).
/// Explained variances are reported as `λ / (N − 1)` so that a linear kernel
/// reproduces [`pca_project`]. Each coordinate vector is signed so its
/// largest-magnitude entry is positive.
pub fn kernel_pca_project(k: &DenseMatrix, dims: usize) -> Result<Projection2D> {
    let n = k.rows();
    if k.cols() != n {
        return Err(invalid!("kernel PCA needs a square kernel, got {:?}", k.shape()));
    }
    if !k.is_symmetric(1e-9) {
        return Err(invalid!(
            "kernel is not symmetric (max asymmetry {:e})",
            k.max_asymmetry()
        ));
    }
    if dims == 0 || n < 2 || dims > n - 1 {
        return Err(invalid!("cannot extract {dims} components from {n} samples"));
    }
    let km = k.to_nalgebra();
    let row_means: Vec<f64> = (0..n).map(|i| km.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let centered = DMatrix::from_fn(n, n, |i, j| km[(i, j)] - row_means[i] - row_means[j] + grand);
    // symmetrize exactly before the solver
    let centered = (&centered + centered.transpose()) * 0.5;
    let (values, vectors) = sorted_eigen(centered);
    let mut coords = DenseMatrix::zeros(n, dims);
    let mut explained = Vec::with_capacity(dims);
    for c in 0..dims {
        let lambda = values[c].max(0.0);
        let mut col: Vec<f64> = vectors.column(c).iter().map(|v| v * lambda.sqrt()).collect();
        fix_sign(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            coords.set(i, c, v);
        }
        explained.push(lambda / (n - 1) as f64);
    }
    Ok(Projection2D {
        coordinates: coords,
        explained_variance: explained,
    })
}
