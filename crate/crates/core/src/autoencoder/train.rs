use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{ImputationMethod, Standardization};
use crate::error::{invalid, Error, Result};
use crate::matrix::DenseMatrix;
use crate::tck::KernelMatrix;
use crate::{io, seed};

use super::backprop::{gradients, Gradients, LossParts};
use super::loss::{code_loss, combine_losses, reconstruction_loss};
use super::network::Autoencoder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            batch_size: 32,
            epochs: 500,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(invalid!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.batch_size == 0 || (self.lambda > 0.0 && self.batch_size < 2) {
            return Err(invalid!(
                "batch size {} too small (at least 2 when lambda > 0)",
                self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid!("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(invalid!("invalid optimizer moment settings"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub code: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Losses before the first update, averaged over the first epoch's batches.
    pub initial: EpochLoss,
    /// Mean batch losses seen during each epoch.
    pub epochs: Vec<EpochLoss>,
    /// Reconstruction loss on a held-out set after training, if one was given.
    pub holdout_reconstruction: Option<f64>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> EpochLoss {
        self.epochs.last().copied().unwrap_or(self.initial)
    }

    /// `epoch,total,reconstruction,code` with epoch 0 the initial state.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("epoch,total,reconstruction,code\n");
        for (e, l) in std::iter::once(&self.initial).chain(&self.epochs).enumerate() {
            let code = l.code.map(|c| c.to_string()).unwrap_or_default();
            s.push_str(&format!("{e},{},{},{code}\n", l.total, l.reconstruction));
        }
        s
    }
}

/// Handed to the observer before each optimization step.
#[derive(Debug)]
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    /// Global row indices of the batch, in batch order.
    pub indices: &'a [usize],
    /// Kernel block used for the code loss (absent when `λ = 0`).
    pub kernel_block: Option<&'a DenseMatrix>,
}

struct Adam {
    m: Gradients,
    v: Gradients,
    step: i32,
}

impl Adam {
    fn new(like: &Gradients) -> Self {
        let mut zero = like.clone();
        zero.weights
            .iter_mut()
            .for_each(|w| w.as_mut_slice().iter_mut().for_each(|x| *x = 0.0));
        zero.biases.iter_mut().for_each(|b| b.iter_mut().for_each(|x| *x = 0.0));
        Adam {
            m: zero.clone(),
            v: zero,
            step: 0,
        }
    }

    fn update(&mut self, ae: &mut Autoencoder, g: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        let lr = cfg.learning_rate;
        let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.epsilon);
        let step = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
        };
        for (l, layer) in ae.layers_mut().iter_mut().enumerate() {
            step(
                layer.weights.as_mut_slice(),
                g.weights[l].as_slice(),
                self.m.weights[l].as_mut_slice(),
                self.v.weights[l].as_mut_slice(),
            );
            step(&mut layer.bias, &g.biases[l], &mut self.m.biases[l], &mut self.v.biases[l]);
        }
    }
}

fn batches(order: &[usize], size: usize, merge_singleton: bool) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if merge_singleton && out.len() > 1 && out.last().map_or(false, |b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        let last = out.len() - 1;
        out[last] = &order[start..];
    }
    out
}

fn batch_loss(
    ae: &Autoencoder,
    x: &DenseMatrix,
    kernel: Option<&KernelMatrix>,
    idx: &[usize],
    lambda: f64,
) -> Result<LossParts> {
    let xb = x.select_rows(idx);
    let codes = ae.encode(&xb)?;
    let lr = reconstruction_loss(&xb, &ae.decode(&codes)?)?;
    let lc = match (lambda > 0.0, kernel) {
        (true, Some(k)) => Some(code_loss(&codes, &k.submatrix(idx))?),
        _ => None,
    };
    Ok(LossParts {
        total: combine_losses(lr, lc.unwrap_or(0.0), lambda),
        reconstruction: lr,
        code: lc,
    })
}

#[derive(Default)]
struct Mean {
    total: f64,
    rec: f64,
    code: f64,
    weight: f64,
}

impl Mean {
    fn add(&mut self, l: &LossParts, w: usize) {
        let w = w as f64;
        self.total += w * l.total;
        self.rec += w * l.reconstruction;
        self.code += w * l.code.unwrap_or(0.0);
        self.weight += w;
    }

    fn finish(&self, has_code: bool) -> EpochLoss {
        EpochLoss {
            total: self.total / self.weight,
            reconstruction: self.rec / self.weight,
            code: has_code.then(|| self.code / self.weight),
        }
    }
}

/// Train on `x` with mini-batches; see [`train_with`].
pub fn train(
    ae: &Autoencoder,
    x: &DenseMatrix,
    kernel: Option<&KernelMatrix>,
    cfg: &TrainConfig,
) -> Result<(Autoencoder, TrainHistory)> {
    train_with(ae, x, kernel, None, cfg, |_| {})
}

/// Mini-batch training. Each epoch shuffles the training rows; the code loss
/// of a batch compares the batch's code Gram matrix with the kernel
/// restricted to the batch's global indices, in batch order. With `λ = 0`
/// the kernel is never read. A trailing batch of one row is merged into the
/// previous batch when `λ > 0`.
pub fn train_with(
    ae: &Autoencoder,
    x: &DenseMatrix,
    kernel: Option<&KernelMatrix>,
    holdout: Option<&DenseMatrix>,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&BatchEvent),
) -> Result<(Autoencoder, TrainHistory)> {
    cfg.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(invalid!("no training rows"));
    }
    if x.cols() != ae.input_dim() {
        return Err(invalid!(
            "training data has {} columns, network expects {}",
            x.cols(),
            ae.input_dim()
        ));
    }
    let use_kernel = cfg.lambda > 0.0;
    let kernel = if use_kernel {
        let k = kernel.ok_or_else(|| invalid!("lambda > 0 requires a prior kernel over the training rows"))?;
        if k.rows() != n || k.cols() != n {
            return Err(invalid!(
                "prior kernel is {}x{}, expected {n}x{n}",
                k.rows(),
                k.cols()
            ));
        }
        if n < 2 {
            return Err(invalid!("lambda > 0 needs at least 2 training rows"));
        }
        Some(k)
    } else {
        None
    };

    let mut rng = seed::rng(cfg.seed);
    let mut model = ae.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut initial = Mean::default();
    for idx in batches(&order, cfg.batch_size, use_kernel) {
        initial.add(&batch_loss(&model, x, kernel, idx, cfg.lambda)?, idx.len());
    }
    let initial = initial.finish(use_kernel);

    let mut adam = None;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            order.shuffle(&mut rng);
        }
        let mut acc = Mean::default();
        for (b, idx) in batches(&order, cfg.batch_size, use_kernel).into_iter().enumerate() {
            let xb = x.select_rows(idx);
            let kb = kernel.map(|k| k.submatrix(idx));
            observer(&BatchEvent {
                epoch,
                batch: b,
                indices: idx,
                kernel_block: kb.as_ref(),
            });
            let (loss, grads) = gradients(&model, &xb, kb.as_ref(), cfg.lambda)?;
            if !loss.total.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {b}; try a smaller learning rate (currently {})",
                    cfg.learning_rate
                )));
            }
            acc.add(&loss, idx.len());
            adam.get_or_insert_with(|| Adam::new(&grads)).update(&mut model, &grads, cfg);
        }
        epochs.push(acc.finish(use_kernel));
    }
    if !model.is_finite() {
        return Err(Error::Numerical(format!(
            "parameters diverged; try a smaller learning rate (currently {})",
            cfg.learning_rate
        )));
    }
    let holdout_reconstruction = match holdout {
        Some(h) => Some(reconstruction_loss(h, &model.reconstruct(h)?)?),
        None => None,
    };
    Ok((
        model,
        TrainHistory {
            initial,
            epochs,
            holdout_reconstruction,
        },
    ))
}

/// Everything needed to reuse a trained network on new raw data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: Autoencoder,
    pub train_config: TrainConfig,
    pub standardization: Option<Standardization>,
    pub imputation: Option<ImputationMethod>,
    pub history: Option<TrainHistory>,
}

impl Checkpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let c: Checkpoint = io::read_json(path)?;
        // re-validate shapes of a possibly hand-edited file
        Autoencoder::from_layers(c.model.layers().to_vec())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(c)
    }
}
