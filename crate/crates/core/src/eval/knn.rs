use crate::error::{invalid, Result};
use crate::matrix::DenseMatrix;
use crate::par;

/// How neighbours are ranked.
#[derive(Clone, Copy, Debug)]
pub enum Neighbors<'a> {
    /// Euclidean distance between rows of `test` and rows of `train`.
    Euclidean {
        train: &'a DenseMatrix,
        test: &'a DenseMatrix,
    },
    /// Precomputed `test × train` similarities; larger means closer.
    Similarity(&'a DenseMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnPrediction {
    pub labels: Vec<u8>,
    /// Fraction of positive labels among the `k` neighbours.
    pub scores: Vec<f64>,
}

/// Majority vote of the `k` nearest training rows. Ranking ties go to the
/// lower training index; a tied vote (even `k`) takes the nearest
/// neighbour's label.
pub fn knn_classify(neighbors: Neighbors<'_>, train_labels: &[u8], k: usize) -> Result<KnnPrediction> {
    let (n_test, n_train) = match neighbors {
        Neighbors::Euclidean { train, test } => {
            if train.cols() != test.cols() {
                return Err(invalid!(
                    "train has {} features, test has {}",
                    train.cols(),
                    test.cols()
                ));
            }
            (test.rows(), train.rows())
        }
        Neighbors::Similarity(s) => (s.rows(), s.cols()),
    };
    if train_labels.len() != n_train {
        return Err(invalid!("{} labels for {n_train} training rows", train_labels.len()));
    }
    if k == 0 || k > n_train {
        return Err(invalid!("k = {k} must lie in 1..={n_train}"));
    }
    if let Some(bad) = train_labels.iter().find(|&&y| y > 1) {
        return Err(invalid!("label {bad} is not binary"));
    }

    let votes = par::map_indexed(n_test, |i| {
        // smaller key = nearer
        let mut keyed: Vec<(f64, usize)> = match neighbors {
            Neighbors::Euclidean { train, test } => {
                let q = test.row(i);
                (0..n_train)
                    .map(|j| {
                        let d: f64 = q.iter().zip(train.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                        (d, j)
                    })
                    .collect()
            }
            Neighbors::Similarity(s) => s.row(i).iter().enumerate().map(|(j, &v)| (-v, j)).collect(),
        };
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n_train {
            keyed.select_nth_unstable_by(k - 1, cmp);
        }
        let nearest = &mut keyed[..k];
        nearest.sort_by(cmp);
        let positives = nearest.iter().filter(|(_, j)| train_labels[*j] == 1).count();
        let label = match (2 * positives).cmp(&k) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => train_labels[nearest[0].1],
        };
        (label, positives as f64 / k as f64)
    });
    Ok(KnnPrediction {
        labels: votes.iter().map(|v| v.0).collect(),
        scores: votes.iter().map(|v| v.1).collect(),
    })
}
