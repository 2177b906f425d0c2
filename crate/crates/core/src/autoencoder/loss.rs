use crate::error::{invalid, Result};
use crate::matrix::DenseMatrix;

/// Mean over samples and dimensions of the squared reconstruction error.
pub fn reconstruction_loss(x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(invalid!(
            "reconstruction shape {:?} differs from input {:?}",
            x_hat.shape(),
            x.shape()
        ));
    }
    let n = x.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let ss: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ss / n as f64)
}

/// Normalized Frobenius distance `‖C/‖C‖ − K/‖K‖‖` between the code Gram
/// matrix `C = codes · codesᵀ` and `kernel`. A zero-norm matrix contributes a
/// zero matrix instead of its normalization.
pub fn code_loss(codes: &DenseMatrix, kernel: &DenseMatrix) -> Result<f64> {
    Ok(code_loss_parts(codes, kernel)?.loss)
}

struct CodeLossParts {
    loss: f64,
    gram: DenseMatrix,
    gram_norm: f64,
    diff: DenseMatrix,
}

fn code_loss_parts(codes: &DenseMatrix, kernel: &DenseMatrix) -> Result<CodeLossParts> {
    let n = codes.rows();
    if n < 2 {
        return Err(invalid!("code loss needs at least 2 samples, got {n}"));
    }
    if kernel.shape() != (n, n) {
        return Err(invalid!(
            "kernel block is {:?}, expected {n}x{n}",
            kernel.shape()
        ));
    }
    if !kernel.is_symmetric(1e-9) {
        return Err(invalid!(
            "kernel block is not symmetric (max asymmetry {:e})",
            kernel.max_asymmetry()
        ));
    }
    let gram = codes.gram();
    let gram_norm = gram.frobenius_norm();
    let k_norm = kernel.frobenius_norm();
    let mut diff = DenseMatrix::zeros(n, n);
    for ((d, &c), &k) in diff
        .as_mut_slice()
        .iter_mut()
        .zip(gram.as_slice())
        .zip(kernel.as_slice())
    {
        let cn = if gram_norm > 0.0 { c / gram_norm } else { 0.0 };
        let kn = if k_norm > 0.0 { k / k_norm } else { 0.0 };
        *d = cn - kn;
    }
    Ok(CodeLossParts {
        loss: diff.frobenius_norm(),
        gram,
        gram_norm,
        diff,
    })
}

/// Code loss together with its gradient with respect to `codes`.
pub fn code_loss_with_grad(codes: &DenseMatrix, kernel: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let p = code_loss_parts(codes, kernel)?;
    let n = codes.rows();
    let mut grad = DenseMatrix::zeros(n, codes.cols());
    if p.loss == 0.0 || p.gram_norm == 0.0 {
        return Ok((p.loss, grad));
    }
    // dL/dA = D / L with A = C/‖C‖; dL/dC = (G − ⟨G, A⟩ A) / ‖C‖
    let inv_l = 1.0 / p.loss;
    let inv_c = 1.0 / p.gram_norm;
    let mut inner = 0.0;
    for (d, c) in p.diff.as_slice().iter().zip(p.gram.as_slice()) {
        inner += d * inv_l * c * inv_c;
    }
    let mut d_gram = DenseMatrix::zeros(n, n);
    for ((g, d), c) in d_gram
        .as_mut_slice()
        .iter_mut()
        .zip(p.diff.as_slice())
        .zip(p.gram.as_slice())
    {
        *g = (d * inv_l - inner * c * inv_c) * inv_c;
    }
    // C = Z Zᵀ  ⇒  dL/dZ = (dC + dCᵀ) Z
    for i in 0..n {
        for j in 0..n {
            let s = d_gram.get(i, j) + d_gram.get(j, i);
            if s != 0.0 {
                crate::matrix::axpy(s, codes.row(j), grad.row_mut(i));
            }
        }
    }
    Ok((p.loss, grad))
}

/// `(1 − λ) L_r + λ L_c`.
pub fn combine_losses(reconstruction: f64, code: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * reconstruction + lambda * code
}

/// Combined objective. With `λ = 0` the kernel is not consulted at all.
pub fn total_loss(
    x: &DenseMatrix,
    x_hat: &DenseMatrix,
    codes: &DenseMatrix,
    kernel: Option<&DenseMatrix>,
    lambda: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid!("lambda must lie in [0, 1], got {lambda}"));
    }
    let lr = reconstruction_loss(x, x_hat)?;
    if lambda == 0.0 {
        return Ok(lr);
    }
    let kernel = kernel.ok_or_else(|| invalid!("lambda > 0 requires a prior kernel"))?;
    let lc = code_loss(codes, kernel)?;
    Ok(combine_losses(lr, lc, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn reconstruction_examples() {
        let x = m(&[vec![1.0, 2.0]]);
        assert_eq!(reconstruction_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(reconstruction_loss(&x, &m(&[vec![0.0, 0.0]])).unwrap(), 2.5);
        let a = m(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = m(&[vec![0.0, 2.5], vec![3.5, 1.0]]);
        let a2 = a.select_rows(&[1, 0]);
        let b2 = b.select_rows(&[1, 0]);
        assert_eq!(reconstruction_loss(&a, &b).unwrap(), reconstruction_loss(&a2, &b2).unwrap());
        assert!(reconstruction_loss(&a, &x).is_err());
    }

    #[test]
    fn code_loss_identity_vs_ones() {
        // code Gram = I₂ from codes e₁, e₂
        let codes = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let k = DenseMatrix::filled(2, 2, 1.0);
        let l = code_loss(&codes, &k).unwrap();
        assert!((l - (2.0 - 2f64.sqrt()).sqrt()).abs() < 1e-12);
        assert!((l - 0.76537).abs() < 1e-5);
    }

    #[test]
    fn code_loss_scale_invariance() {
        let codes = m(&[vec![0.2, 0.7], vec![0.9, 0.1], vec![0.4, 0.4]]);
        let k = codes.gram().scaled(3.5);
        assert!(code_loss(&codes, &k).unwrap() < 1e-12);
        let other = m(&[vec![1.0, 0.2, 0.1], vec![0.2, 1.0, 0.3], vec![0.1, 0.3, 1.0]]);
        let l1 = code_loss(&codes, &other).unwrap();
        let l2 = code_loss(&codes.scaled(4.0), &other).unwrap();
        let l3 = code_loss(&codes, &other.scaled(0.01)).unwrap();
        assert!((l1 - l2).abs() < 1e-12 && (l1 - l3).abs() < 1e-12);
    }

    #[test]
    fn code_loss_rejects_asymmetric_and_tiny_batches() {
        let codes = m(&[vec![1.0], vec![2.0]]);
        let k = m(&[vec![1.0, 0.5], vec![0.4, 1.0]]);
        assert!(code_loss(&codes, &k).is_err());
        assert!(code_loss(&m(&[vec![1.0]]), &m(&[vec![1.0]])).is_err());
    }

    #[test]
    fn zero_codes_use_zero_matrix() {
        let codes = DenseMatrix::zeros(2, 3);
        let k = DenseMatrix::identity(2);
        // ‖0 − I/√2‖ = 1
        let (l, g) = code_loss_with_grad(&codes, &k).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn total_loss_endpoints() {
        let x = m(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let xh = m(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let codes = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let k = DenseMatrix::filled(2, 2, 1.0);
        let lr = reconstruction_loss(&x, &xh).unwrap();
        let lc = code_loss(&codes, &k).unwrap();
        assert_eq!(total_loss(&x, &xh, &codes, None, 0.0).unwrap(), lr);
        assert!((total_loss(&x, &xh, &codes, Some(&k), 1.0).unwrap() - lc).abs() < 1e-15);
        assert_eq!(combine_losses(2.0, 1.0, 0.5), 1.5);
        assert!(total_loss(&x, &xh, &codes, None, 0.5).is_err());
        assert!(total_loss(&x, &xh, &codes, Some(&k), 1.5).is_err());
    }
}
