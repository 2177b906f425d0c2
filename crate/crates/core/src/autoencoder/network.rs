use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{axpy, DenseMatrix};
use crate::seed;
use rand::Rng as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub(crate) fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Dense layer computing `act(a · W + b)`; `weights` is `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub(crate) fn forward(&self, input: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(input.rows(), self.fan_out());
        for i in 0..input.rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.bias);
            for (k, &a) in input.row(i).iter().enumerate() {
                axpy(a, self.weights.row(k), row);
            }
            for z in row.iter_mut() {
                *z = self.activation.apply(*z);
            }
        }
        out
    }
}

/// Layer sizes are `[d_in, h_1, .., d_code, .., h_1, d_in]`, symmetric around
/// the code layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 3 || sizes.len() % 2 == 0 {
        return Err(invalid!(
            "layer sizes {sizes:?} must have odd length >= 3 (input, .., code, .., output)"
        ));
    }
    if sizes.contains(&0) {
        return Err(invalid!("layer sizes {sizes:?} must be positive"));
    }
    let n = sizes.len();
    if (0..n / 2).any(|i| sizes[i] != sizes[n - 1 - i]) {
        return Err(invalid!("layer sizes {sizes:?} are not symmetric around the code layer"));
    }
    if sizes[n / 2] >= sizes[0] {
        return Err(invalid!(
            "code size {} must be smaller than the input size {}",
            sizes[n / 2],
            sizes[0]
        ));
    }
    Ok(())
}

/// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
pub fn init_network(layer_sizes: &[usize], seed: u64) -> Result<Autoencoder> {
    validate_sizes(layer_sizes)?;
    let mut rng = seed::rng(seed);
    let n_layers = layer_sizes.len() - 1;
    let layers = (0..n_layers)
        .map(|l| {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-r..r)).collect();
            Layer {
                weights: DenseMatrix::from_vec_unchecked(fan_in, fan_out, w),
                bias: vec![0.0; fan_out],
                activation: if l + 1 == n_layers {
                    Activation::Linear
                } else {
                    Activation::Sigmoid
                },
            }
        })
        .collect();
    Ok(Autoencoder {
        layer_sizes: layer_sizes.to_vec(),
        layers,
    })
}

impl Autoencoder {
    /// Assemble from explicit layers; sizes and activations are checked.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let mut sizes: Vec<usize> = layers.iter().map(Layer::fan_in).collect();
        sizes.extend(layers.last().map(Layer::fan_out));
        validate_sizes(&sizes)?;
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(invalid!("layer {l} output does not feed layer {}", l + 1));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.fan_out() {
                return Err(invalid!("bias length does not match layer width"));
            }
        }
        Ok(Autoencoder {
            layer_sizes: sizes,
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.layer_sizes[self.code_layer()]
    }

    /// Index (into activations) of the code layer; also the number of
    /// encoder layers.
    pub fn code_layer(&self) -> usize {
        self.layer_sizes.len() / 2
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Activations of every layer, starting with the input itself.
    pub(crate) fn forward_all(&self, x: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        if x.cols() != self.input_dim() {
            return Err(invalid!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            ));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap());
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn encode(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.input_dim() {
            return Err(invalid!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            ));
        }
        let mut a = x.clone();
        for layer in &self.layers[..self.code_layer()] {
            a = layer.forward(&a);
        }
        Ok(a)
    }

    pub fn decode(&self, codes: &DenseMatrix) -> Result<DenseMatrix> {
        if codes.cols() != self.code_dim() {
            return Err(invalid!(
                "codes have {} columns, network expects {}",
                codes.cols(),
                self.code_dim()
            ));
        }
        let mut a = codes.clone();
        for layer in &self.layers[self.code_layer()..] {
            a = layer.forward(&a);
        }
        Ok(a)
    }

    pub fn reconstruct(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.decode(&self.encode(x)?)
    }
}
