//! Parameter storage, forward evaluation, and reverse-mode gradients.
//!
//! Parameters live in one flat vector with a layout mapping each
//! parameterized layer to its weight/bias slices; optimizer state and
//! checkpoints align with the same flat view. The forward pass records every
//! layer input (plus pooling argmax positions) in a [`ForwardTrace`], which
//! the backward pass consumes, so gradients can never be requested for a
//! pass that was not run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{layers, LayerSpec, NetworkConfig};
use crate::tensor::Tensor;

/// Where each layer's weights and biases sit inside the flat parameter
/// vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    entries: Vec<LayoutEntry>,
    total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LayoutEntry {
    layer_index: usize,
    weight_offset: usize,
    weight_len: usize,
    bias_offset: usize,
    bias_len: usize,
}

impl ParamLayout {
    pub fn from_config(config: &NetworkConfig) -> Self {
        let mut entries = Vec::new();
        let mut offset = 0;
        for (layer_index, layer) in config.layers.iter().enumerate() {
            if let Some((w_shape, b_len)) = layer.param_shapes() {
                let w_len: usize = w_shape.iter().product();
                entries.push(LayoutEntry {
                    layer_index,
                    weight_offset: offset,
                    weight_len: w_len,
                    bias_offset: offset + w_len,
                    bias_len: b_len,
                });
                offset += w_len + b_len;
            }
        }
        Self {
            entries,
            total: offset,
        }
    }

    /// Total parameter count.
    pub fn total(&self) -> usize {
        self.total
    }

    fn entry(&self, layer_index: usize) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.layer_index == layer_index)
    }
}

/// All trainable parameters of a network, flat and layout-addressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    layout: ParamLayout,
    data: Vec<f64>,
}

impl Parameters {
    /// All-zero parameters for the given architecture (used for gradients
    /// and optimizer state).
    pub fn zeros(config: &NetworkConfig) -> Self {
        let layout = ParamLayout::from_config(config);
        let data = vec![0.0; layout.total()];
        Self { layout, data }
    }

    /// Seeded He-style initialization: weights drawn from a normal
    /// distribution with stddev `sqrt(2 / fan_in)`, biases zero. Identical
    /// seeds give bit-identical parameters.
    pub fn init(config: &NetworkConfig, seed: u64) -> Self {
        let layout = ParamLayout::from_config(config);
        let mut data = vec![0.0; layout.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for entry in &layout.entries {
            let fan_in = config.layers[entry.layer_index]
                .fan_in()
                .expect("parameterized layers have a fan-in");
            let stddev = (2.0 / fan_in as f64).sqrt();
            let dist = Normal::new(0.0, stddev).expect("finite stddev");
            for w in &mut data[entry.weight_offset..entry.weight_offset + entry.weight_len] {
                *w = dist.sample(&mut rng);
            }
            // biases stay zero
        }
        Self { layout, data }
    }

    /// Restores parameters from a flat vector (checkpoint loading).
    pub fn from_flat(config: &NetworkConfig, flat: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::from_config(config);
        if flat.len() != layout.total() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter vector has {} values, architecture needs {}",
                flat.len(),
                layout.total()
            )));
        }
        Ok(Self { layout, data: flat })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// The flat view: optimizer state indexes into this.
    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Weight slice of the layer at `layer_index`, if it has parameters.
    pub fn weight(&self, layer_index: usize) -> Option<&[f64]> {
        self.layout
            .entry(layer_index)
            .map(|e| &self.data[e.weight_offset..e.weight_offset + e.weight_len])
    }

    /// Bias slice of the layer at `layer_index`, if it has parameters.
    pub fn bias(&self, layer_index: usize) -> Option<&[f64]> {
        self.layout
            .entry(layer_index)
            .map(|e| &self.data[e.bias_offset..e.bias_offset + e.bias_len])
    }

    fn write_grads(&mut self, layer_index: usize, grad_w: &[f64], grad_b: &[f64]) {
        let entry = self
            .layout
            .entry(layer_index)
            .expect("gradient written for a parameterless layer")
            .clone();
        self.data[entry.weight_offset..entry.weight_offset + entry.weight_len]
            .copy_from_slice(grad_w);
        self.data[entry.bias_offset..entry.bias_offset + entry.bias_len].copy_from_slice(grad_b);
    }
}

/// Everything the backward pass needs from a forward pass: the input each
/// layer consumed, pooling argmax positions, and the final output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Tensor>,
    pool_argmax: Vec<Vec<usize>>,
    output: Vec<f64>,
}

impl ForwardTrace {
    /// The network prediction, `output_dim` values.
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Runs the layer stack on `input`, recording a trace for backpropagation.
pub fn forward(config: &NetworkConfig, params: &Parameters, input: &Tensor) -> Result<ForwardTrace> {
    let mut inputs = Vec::with_capacity(config.layers.len());
    let mut pool_argmax = vec![Vec::new(); config.layers.len()];
    let mut current = input.clone();
    for (i, layer) in config.layers.iter().enumerate() {
        let next = match *layer {
            LayerSpec::Conv1d {
                out_channels,
                kernel_size,
                stride,
                padding,
                ..
            } => layers::conv1d_forward(
                &current,
                params.weight(i).ok_or_else(missing_params)?,
                params.bias(i).ok_or_else(missing_params)?,
                out_channels,
                kernel_size,
                stride,
                padding,
            )?,
            LayerSpec::Relu => layers::relu_forward(&current),
            LayerSpec::MaxPool1d { window, stride } => {
                let (out, argmax) = layers::maxpool1d_forward(&current, window, stride)?;
                pool_argmax[i] = argmax;
                out
            }
            LayerSpec::GlobalAvgPool => layers::global_avg_pool_forward(&current)?,
            LayerSpec::Dense { out_features, .. } => layers::dense_forward(
                &current,
                params.weight(i).ok_or_else(missing_params)?,
                params.bias(i).ok_or_else(missing_params)?,
                out_features,
            )?,
        };
        debug_assert!(next.all_finite(), "non-finite activation after layer {i}");
        inputs.push(current);
        current = next;
    }
    if current.shape().len() != 1 || current.len() != config.output_dim {
        return Err(Error::ShapeMismatch(format!(
            "network produced shape {:?}, expected a length-{} vector",
            current.shape(),
            config.output_dim
        )));
    }
    Ok(ForwardTrace {
        inputs,
        pool_argmax,
        output: current.into_data(),
    })
}

fn missing_params() -> Error {
    Error::ShapeMismatch("parameters missing for a parameterized layer".into())
}

/// Backpropagates `loss_grad` (d loss / d output) through the trace.
///
/// Returns parameter gradients in [`Parameters`] shape plus the gradient
/// with respect to the network input.
pub fn backward(
    config: &NetworkConfig,
    params: &Parameters,
    trace: &ForwardTrace,
    loss_grad: &[f64],
) -> Result<(Parameters, Tensor)> {
    if loss_grad.len() != config.output_dim {
        return Err(Error::LengthMismatch {
            left: loss_grad.len(),
            right: config.output_dim,
        });
    }
    if trace.inputs.len() != config.layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "trace covers {} layers, config has {}",
            trace.inputs.len(),
            config.layers.len()
        )));
    }
    let mut grads = Parameters::zeros(config);
    let mut grad = Tensor::from_vec(&[config.output_dim], loss_grad.to_vec())?;
    for (i, layer) in config.layers.iter().enumerate().rev() {
        let input = &trace.inputs[i];
        grad = match *layer {
            LayerSpec::Conv1d {
                kernel_size,
                stride,
                padding,
                ..
            } => {
                let (gi, gw, gb) = layers::conv1d_backward(
                    input,
                    params.weight(i).ok_or_else(missing_params)?,
                    &grad,
                    kernel_size,
                    stride,
                    padding,
                )?;
                grads.write_grads(i, &gw, &gb);
                gi
            }
            LayerSpec::Relu => layers::relu_backward(input, &grad)?,
            LayerSpec::MaxPool1d { .. } => {
                layers::maxpool1d_backward(input.shape(), &trace.pool_argmax[i], &grad)?
            }
            LayerSpec::GlobalAvgPool => layers::global_avg_pool_backward(input, &grad)?,
            LayerSpec::Dense { .. } => {
                let (gi, gw, gb) = layers::dense_backward(
                    input,
                    params.weight(i).ok_or_else(missing_params)?,
                    &grad,
                )?;
                grads.write_grads(i, &gw, &gb);
                gi
            }
        };
    }
    Ok((grads, grad))
}

/// Mean squared error over the prediction vector.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Gradient of [`mse_loss`] with respect to the prediction.
pub fn mse_loss_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect())
}
