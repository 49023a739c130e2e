//! Dense feed-forward networks: forward and backward passes, Adam, the
//! training loop, finite-difference gradient checking and input scaling.
//!
//! Shared by the autoencoder reducers and the DNN classifiers.

mod adam;
mod gradcheck;
mod scale;
mod train;

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport, FD_STEP};
pub use scale::FeatureScaler;
pub use train::{train, train_network, TrainConfig, TrainingTrace, Validation};

use crate::codec;
use crate::error::{Error, Result};
use crate::seed::Rng;

pub const NETWORK_MAGIC: &str = "OPCLASS-NN1";

/// BCE probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Exponential linear unit with alpha = 1.
    Elu,
    Linear,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Linear => x,
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a = f(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    BinaryCrossEntropy,
}

impl Loss {
    /// Mean loss over every element of `output`.
    pub fn value(self, output: ArrayView2<f64>, targets: ArrayView2<f64>) -> f64 {
        let n = output.len().max(1) as f64;
        let total: f64 = match self {
            Loss::Mse => output
                .iter()
                .zip(targets.iter())
                .map(|(y, t)| (y - t) * (y - t))
                .sum(),
            Loss::BinaryCrossEntropy => output
                .iter()
                .zip(targets.iter())
                .map(|(&p, &t)| {
                    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .sum(),
        };
        total / n
    }

    /// Derivative of [`Loss::value`] with respect to each output element.
    pub fn gradient(self, output: ArrayView2<f64>, targets: ArrayView2<f64>) -> Array2<f64> {
        let n = output.len().max(1) as f64;
        let mut grad = output.to_owned();
        ndarray::Zip::from(&mut grad)
            .and(&targets)
            .for_each(|g, &t| {
                let y = *g;
                *g = match self {
                    Loss::Mse => 2.0 * (y - t) / n,
                    Loss::BinaryCrossEntropy => {
                        if (BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&y) {
                            (-t / y + (1.0 - t) / (1.0 - y)) / n
                        } else {
                            0.0
                        }
                    }
                };
            });
        grad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub dropout_rate: f64,
    pub loss: Loss,
}

impl NetworkSpec {
    /// ELU on every hidden layer, `output` on the last.
    pub fn feed_forward(widths: &[usize], output: Activation, dropout_rate: f64, loss: Loss) -> Self {
        let n_layers = widths.len().saturating_sub(1);
        let mut activations = vec![Activation::Elu; n_layers];
        if let Some(last) = activations.last_mut() {
            *last = output;
        }
        NetworkSpec {
            layer_widths: widths.to_vec(),
            activations,
            dropout_rate,
            loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer widths {:?}",
                self.layer_widths
            )));
        }
        if self.activations.len() != self.layer_widths.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.layer_widths.len() - 1
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    pub fn n_layers(&self) -> usize {
        self.activations.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`, row-major.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Intermediates of a forward pass, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (after dropout of the previous layer).
    pub inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
    /// Dropout multipliers applied to each hidden layer's output.
    pub masks: Vec<Option<Array2<f64>>>,
    pub output: Array2<f64>,
}

/// Per-layer parameter gradients, in layer order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Dense>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: NetworkSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..=limit));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Network { spec, layers })
    }

    pub fn from_layers(spec: NetworkSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.n_layers() {
            return Err(Error::shape(spec.n_layers(), layers.len()));
        }
        for (l, layer) in layers.iter().enumerate() {
            let expected = (spec.layer_widths[l], spec.layer_widths[l + 1]);
            if layer.weights.dim() != expected || layer.bias.len() != expected.1 {
                return Err(Error::shape(
                    format!("{expected:?}"),
                    format!("{:?}", layer.weights.dim()),
                ));
            }
        }
        Ok(Network { spec, layers })
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, batch: ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.spec.input_width() {
            return Err(Error::shape(
                format!("{} input columns", self.spec.input_width()),
                format!("{} columns", batch.ncols()),
            ));
        }
        Ok(())
    }

    /// Inference pass; dropout is inactive.
    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.predict_layers(batch, self.layers.len())
    }

    /// Activations after the first `n_layers` layers, dropout inactive.
    pub fn predict_layers(&self, batch: ArrayView2<f64>, n_layers: usize) -> Result<Array2<f64>> {
        self.check_input(batch)?;
        let mut a = batch.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.spec.activations).take(n_layers) {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            z.mapv_inplace(|v| act.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Forward pass. In train mode with a positive dropout rate, hidden
    /// activations are multiplied by inverted-dropout masks drawn from `rng`.
    pub fn forward(&self, batch: ArrayView2<f64>, mode: Mode, rng: &mut Rng) -> Result<ForwardCache> {
        let p = self.spec.dropout_rate;
        let masks = if mode == Mode::Train && p > 0.0 {
            let keep = 1.0 / (1.0 - p);
            (0..self.layers.len())
                .map(|l| {
                    (l + 1 < self.layers.len()).then(|| {
                        let width = self.spec.layer_widths[l + 1];
                        Array2::from_shape_simple_fn((batch.nrows(), width), || {
                            if rng.gen::<f64>() < p {
                                0.0
                            } else {
                                keep
                            }
                        })
                    })
                })
                .collect()
        } else {
            vec![None; self.layers.len()]
        };
        self.forward_with_masks(batch, masks)
    }

    /// Forward pass with caller-provided dropout multipliers (one optional
    /// `batch x width` matrix per layer; the last layer's entry is ignored).
    pub fn forward_with_masks(
        &self,
        batch: ArrayView2<f64>,
        masks: Vec<Option<Array2<f64>>>,
    ) -> Result<ForwardCache> {
        self.check_input(batch)?;
        if masks.len() != self.layers.len() {
            return Err(Error::shape(self.layers.len(), masks.len()));
        }
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut a = batch.to_owned();
        for (l, (layer, act)) in self.layers.iter().zip(&self.spec.activations).enumerate() {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            let mut out = z.mapv(|v| act.apply(v));
            if l + 1 < n_layers {
                if let Some(mask) = &masks[l] {
                    if mask.dim() != out.dim() {
                        return Err(Error::shape(format!("{:?}", out.dim()), format!("{:?}", mask.dim())));
                    }
                    out *= mask;
                }
            }
            inputs.push(a);
            pre_activations.push(z);
            a = out;
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            masks,
            output: a,
        })
    }

    /// Backpropagates the loss against `targets`; returns the loss and gradients.
    pub fn backward(&self, cache: &ForwardCache, targets: ArrayView2<f64>) -> Result<(f64, Gradients)> {
        if targets.dim() != cache.output.dim() {
            return Err(Error::shape(
                format!("{:?} targets", cache.output.dim()),
                format!("{:?}", targets.dim()),
            ));
        }
        let loss = self.spec.loss.value(cache.output.view(), targets);
        let mut upstream = self.spec.loss.gradient(cache.output.view(), targets);
        let n_layers = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let act = self.spec.activations[l];
            let z = &cache.pre_activations[l];
            // activation before any dropout mask
            let mut dz = upstream;
            if l + 1 < n_layers {
                if let Some(mask) = &cache.masks[l] {
                    dz *= mask;
                }
            }
            ndarray::Zip::from(&mut dz).and(z).for_each(|d, &zv| {
                *d *= act.derivative(zv, act.apply(zv));
            });
            let weights = cache.inputs[l].t().dot(&dz).as_standard_layout().into_owned();
            let bias = dz.sum_axis(Axis(0));
            upstream = dz.dot(&self.layers[l].weights.t());
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// Mean loss in inference mode.
    pub fn loss(&self, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
        let out = self.predict(inputs)?;
        if out.dim() != targets.dim() {
            return Err(Error::shape(format!("{:?}", out.dim()), format!("{:?}", targets.dim())));
        }
        Ok(self.spec.loss.value(out.view(), targets))
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        codec::write_magic(out, NETWORK_MAGIC)?;
        codec::write_json(out, &self.spec)?;
        for layer in &self.layers {
            codec::write_f64s(out, layer.weights.as_standard_layout().as_slice().expect("standard layout"))?;
            codec::write_f64s(out, layer.bias.as_slice().expect("contiguous"))?;
        }
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        codec::read_magic(input, NETWORK_MAGIC)?;
        let spec: NetworkSpec = codec::read_json(input)?;
        spec.validate().map_err(|e| Error::ModelFile(e.to_string()))?;
        let mut layers = Vec::with_capacity(spec.n_layers());
        for w in spec.layer_widths.windows(2) {
            let weights = Array2::from_shape_vec((w[0], w[1]), codec::read_f64s(input)?)
                .map_err(|e| Error::ModelFile(e.to_string()))?;
            let bias = Array1::from(codec::read_f64s(input)?);
            layers.push(Dense { weights, bias });
        }
        Network::from_layers(spec, layers).map_err(|e| Error::ModelFile(e.to_string()))
    }
}
