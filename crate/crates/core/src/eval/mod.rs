//! Classification metrics and low-dimensional projections used to assess
//! learned codes and kernels.

mod knn;
mod metrics;
mod projection;
mod report;

pub use knn::{knn_classify, KnnPrediction, Neighbors};
pub use metrics::{auc_roc, f1_score, mse};
pub use projection::{kernel_pca_project, pca_project, Projection2D};
pub use report::{EvalReport, RunMetrics, Summary};
