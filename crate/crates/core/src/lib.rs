//! Compressed representations of multivariate time series with missing
//! values.
//!
//! The crate fits the time series cluster kernel (an ensemble of
//! missing-aware Gaussian mixtures), trains autoencoders whose code inner
//! products are aligned to that kernel, and evaluates codes with k-nearest
//! neighbours, F1, ROC AUC and PCA / kernel PCA projections.

pub mod autoencoder;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod matrix;
pub mod par;
pub mod seed;
pub mod synth;
pub mod tck;

pub use data::{
    flatten, impute, load_dataset, save_dataset, split_train_test, standardize, ImputationMethod,
    Standardization, TimeSeriesDataset,
};
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use tck::{fit_tck, kernel_matrix, KernelMatrix, TckConfig, TckModel};
pub use synth::{generate, SynthConfig};
