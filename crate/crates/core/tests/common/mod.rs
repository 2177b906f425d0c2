#![allow(dead_code)]

use rand::Rng;
use tckae::seed::rng;
use tckae::{generate, standardize, SynthConfig, TimeSeriesDataset};

/// Standardized synthetic training set.
pub fn synthetic(n: usize, missing: f64, seed: u64) -> TimeSeriesDataset {
    let cfg = SynthConfig {
        n,
        missing_rate: missing,
        seed,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    standardize(&ds, &ds).unwrap().0
}

/// Random dataset with roughly `missing` of its cells masked out.
pub fn random_dataset(n: usize, t: usize, v: usize, missing: f64, seed: u64) -> TimeSeriesDataset {
    let mut r = rng(seed);
    loop {
        let values: Vec<f64> = (0..n * t * v).map(|_| r.random_range(-2.0..2.0)).collect();
        let mask: Vec<bool> = (0..n * t * v).map(|_| r.random::<f64>() >= missing).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        if let Ok(ds) = TimeSeriesDataset::new(n, t, v, values, mask, Some(labels)) {
            return ds;
        }
    }
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}
