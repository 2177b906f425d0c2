use crate::autoencoder::reconstruction_loss;
use crate::error::{invalid, Result};
use crate::matrix::DenseMatrix;

/// F1 of the positive class (label 1); 0 when precision + recall is 0.
pub fn f1_score(truth: &[u8], predicted: &[u8]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(invalid!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        ));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fneg += 1,
            (0, 0) => {}
            _ => return Err(invalid!("labels must be binary")),
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Area under the ROC curve as the Mann–Whitney statistic: the probability
/// that a random positive scores above a random negative, ties counting one
/// half. Uses mid-ranks, `O(n log n)`.
pub fn auc_roc(truth: &[u8], scores: &[f64]) -> Result<f64> {
    if truth.len() != scores.len() {
        return Err(invalid!("{} labels vs {} scores", truth.len(), scores.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid!("scores must not be NaN"));
    }
    let n_pos = truth.iter().filter(|&&y| y == 1).count();
    let n_neg = truth.iter().filter(|&&y| y == 0).count();
    if n_pos + n_neg != truth.len() {
        return Err(invalid!("labels must be binary"));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(invalid!("AUC needs both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share their average
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += mid * order[i..j].iter().filter(|&&o| truth[o] == 1).count() as f64;
        i = j;
    }
    let p = n_pos as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * n_neg as f64))
}

/// Reconstruction mean squared error, identical to the training loss.
pub fn mse(x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    reconstruction_loss(x, x_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        // TP=2, FP=1, FN=1
        let f = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(&[0, 0], &[0, 0]).unwrap(), 0.0);
        assert!(f1_score(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), 0.5);
        let a = auc_roc(&[1, 1, 0, 1], &[0.9, 0.8, 0.4, 0.3]).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!(auc_roc(&[1, 1], &[0.1, 0.2]).is_err());
    }
}
