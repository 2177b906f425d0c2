//! Two-class synthetic multivariate series with class-dependent missingness.
//!
//! Each variable follows a first-order autoregression around a class-specific
//! level plus a class-specific sinusoid. Cells go missing independently with
//! a rate that depends on the (class, variable) pair; `informative_missingness`
//! controls how far the two classes' rates are pulled apart while keeping the
//! overall expected rate at `missing_rate`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesDataset;
use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng};

/// Highest per-(class, variable) missing rate the informative split may reach.
const MAX_CELL_RATE: f64 = 0.95;
/// Minimum probability that a freshly drawn mask row has two observations.
const MIN_ROW_ACCEPT: f64 = 0.5;
const MAX_MASK_DRAWS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub t: usize,
    pub v: usize,
    /// Expected fraction of class-1 series.
    pub class_balance: f64,
    /// Difference between the two classes' stationary levels.
    pub separation: f64,
    pub missing_rate: f64,
    pub informative_missingness: f64,
    pub noise_std: f64,
    /// Autoregressive coefficient.
    pub ar: f64,
    pub amplitude: f64,
    /// Sinusoid period for class 0 and class 1.
    pub periods: [f64; 2],
    /// Class gap in per-cell missing rate at `informative_missingness = 1`,
    /// before clipping to keep both rates valid.
    pub max_rate_gap: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 600,
            t: 20,
            v: 10,
            class_balance: 0.5,
            separation: 0.5,
            missing_rate: 0.5,
            informative_missingness: 0.8,
            noise_std: 1.0,
            ar: 0.7,
            amplitude: 0.5,
            periods: [10.0, 7.0],
            max_rate_gap: 0.15,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 4 || self.t < 2 || self.v < 1 {
            return Err(invalid!(
                "need N >= 4, T >= 2, V >= 1 (got N={}, T={}, V={})",
                self.n,
                self.t,
                self.v
            ));
        }
        if !(self.class_balance > 0.0 && self.class_balance < 1.0) {
            return Err(invalid!("class_balance {} must lie in (0, 1)", self.class_balance));
        }
        if !(self.missing_rate >= 0.0 && self.missing_rate < 1.0) {
            return Err(invalid!("missing_rate {} must lie in [0, 1)", self.missing_rate));
        }
        if !(0.0..=1.0).contains(&self.informative_missingness) {
            return Err(invalid!(
                "informative_missingness {} must lie in [0, 1]",
                self.informative_missingness
            ));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(invalid!("noise_std must be positive"));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(invalid!("separation must be non-negative"));
        }
        if !(self.ar.abs() < 1.0) {
            return Err(invalid!("ar coefficient {} must satisfy |ar| < 1", self.ar));
        }
        if !self.amplitude.is_finite() || self.periods.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(invalid!("amplitude must be finite and periods positive"));
        }
        if !(self.max_rate_gap >= 0.0 && self.max_rate_gap <= 1.0) {
            return Err(invalid!("max_rate_gap {} must lie in [0, 1]", self.max_rate_gap));
        }
        Ok(())
    }

    /// Number of class-1 series.
    pub fn positives(&self) -> usize {
        ((self.n as f64 * self.class_balance).round() as usize).clamp(2, self.n - 2)
    }

    /// Missing rate for each class (outer) and variable (inner). The
    /// class-weighted mean of every column equals `missing_rate`.
    pub fn missing_rates(&self) -> [Vec<f64>; 2] {
        let p1 = self.positives() as f64 / self.n as f64;
        let p0 = 1.0 - p1;
        let m = self.missing_rate;
        // largest class gap keeping both rates inside [0, MAX_CELL_RATE]
        let room = m.min(MAX_CELL_RATE - m).max(0.0) / p0.max(p1);
        let gap = self.informative_missingness * self.max_rate_gap.min(room);
        let mut rates = [vec![0.0; self.v], vec![0.0; self.v]];
        for v in 0..self.v {
            let sign = if v % 2 == 0 { 1.0 } else { -1.0 };
            rates[0][v] = (m - sign * gap * p1).clamp(0.0, 1.0);
            rates[1][v] = (m + sign * gap * p0).clamp(0.0, 1.0);
        }
        rates
    }
}

/// Probability that a row with independent per-cell missing rates has at
/// least two observed cells.
fn prob_two_observed(rates: &[f64], t: usize) -> f64 {
    // track P(0 observed) and P(exactly 1 observed) across cells
    let (mut p0, mut p1) = (1.0_f64, 0.0_f64);
    for &r in rates {
        for _ in 0..t {
            p1 = p1 * r + p0 * (1.0 - r);
            p0 *= r;
        }
    }
    1.0 - p0 - p1
}

/// Draw a labelled dataset. Deterministic in `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<TimeSeriesDataset> {
    cfg.validate()?;
    let (n, t, v) = (cfg.n, cfg.t, cfg.v);
    let rates = cfg.missing_rates();
    for (c, r) in rates.iter().enumerate() {
        let ok = prob_two_observed(r, t);
        if ok < MIN_ROW_ACCEPT {
            return Err(invalid!(
                "missing_rate {} is infeasible: a class-{c} series has two observations with probability {ok:.3}",
                cfg.missing_rate
            ));
        }
    }

    let mut labels = vec![0u8; n];
    labels[..cfg.positives()].fill(1);
    labels.shuffle(&mut rng(derive_seed(cfg.seed, "synth-labels", 0)));

    let mut values = vec![0.0; n * t * v];
    let mut mask = vec![true; n * t * v];
    let mut signal = rng(derive_seed(cfg.seed, "synth-signal", 0));
    let mut missing = rng(derive_seed(cfg.seed, "synth-mask", 0));
    let stationary_sd = cfg.noise_std / (1.0 - cfg.ar * cfg.ar).sqrt();
    for (i, &y) in labels.iter().enumerate() {
        let c = y as usize;
        let level = (c as f64 - 0.5) * cfg.separation;
        let shift = level * (1.0 - cfg.ar);
        let period = cfg.periods[c];
        let block = &mut values[i * t * v..(i + 1) * t * v];
        for var in 0..v {
            let phase = 2.0 * PI * var as f64 / v as f64;
            let mut x = level + stationary_sd * signal.sample::<f64, _>(StandardNormal);
            for step in 0..t {
                let wave = cfg.amplitude * (2.0 * PI * step as f64 / period + phase).sin();
                x = cfg.ar * x + shift + cfg.noise_std * signal.sample::<f64, _>(StandardNormal);
                block[step * v + var] = x + wave;
            }
        }
        if cfg.missing_rate > 0.0 {
            let row = &mut mask[i * t * v..(i + 1) * t * v];
            let mut draws = 0;
            loop {
                for (cell, m) in row.iter_mut().enumerate() {
                    *m = missing.random::<f64>() >= rates[c][cell % v];
                }
                if row.iter().filter(|&&m| m).count() >= 2 {
                    break;
                }
                draws += 1;
                if draws == MAX_MASK_DRAWS {
                    return Err(Error::Numerical(format!(
                        "could not draw a mask with two observations for series {i}"
                    )));
                }
            }
        }
    }
    for (x, &m) in values.iter_mut().zip(&mask) {
        if !m {
            *x = f64::NAN;
        }
    }
    TimeSeriesDataset::new(n, t, v, values, mask, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_missingness_gives_full_mask() {
        let cfg = SynthConfig {
            n: 20,
            missing_rate: 0.0,
            ..SynthConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        assert!(ds.mask().iter().all(|&m| m));
    }

    #[test]
    fn rates_average_to_target() {
        let cfg = SynthConfig {
            n: 11,
            class_balance: 0.3,
            ..SynthConfig::default()
        };
        let p1 = cfg.positives() as f64 / 11.0;
        let r = cfg.missing_rates();
        for v in 0..cfg.v {
            let avg = (1.0 - p1) * r[0][v] + p1 * r[1][v];
            assert!((avg - cfg.missing_rate).abs() < 1e-12);
            assert!(r[0][v] >= 0.0 && r[1][v] <= MAX_CELL_RATE + 1e-12);
        }
    }

    #[test]
    fn extreme_rate_is_rejected() {
        let cfg = SynthConfig {
            missing_rate: 0.999,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Invalid(_))));
    }

    #[test]
    fn class_counts_are_clamped() {
        let cfg = SynthConfig {
            n: 5,
            class_balance: 0.01,
            ..SynthConfig::default()
        };
        assert_eq!(cfg.positives(), 2);
    }

    #[test]
    fn two_observation_probability() {
        // two cells, each observed with probability 1/2
        assert!((prob_two_observed(&[0.5, 0.5], 1) - 0.25).abs() < 1e-15);
        assert_eq!(prob_two_observed(&[0.0], 3), 1.0);
    }
}
