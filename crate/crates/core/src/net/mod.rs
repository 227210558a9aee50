//! The condition-channel 1D CNN.
//!
//! The model consumes a `(7 + K) × T` input: seven preprocessed signal rows
//! plus K cutting conditions broadcast as constant rows. The reference model
//! is the identical stack with K = 0. Layers are a fixed vocabulary
//! (convolution, relu, max pooling, global average pooling, dense) with
//! hand-written reverse-mode gradients.

pub mod checkpoint;
pub mod layers;
pub mod network;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ConditionKey, ProcessedSample, SAMPLE_CHANNELS};
use crate::tensor::Tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use network::{backward, forward, mse_loss, mse_loss_grad, ForwardTrace, ParamLayout, Parameters};

/// Smallest window the default architecture supports; below this the time
/// axis would collapse before the final pooling stage.
pub const MIN_WINDOW: usize = 64;

/// One layer of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool1d {
        window: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense {
        in_features: usize,
        out_features: usize,
    },
}

/// Shape of the data flowing between layers: a channels × time matrix until
/// global pooling, a flat vector afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataShape {
    Matrix { channels: usize, steps: usize },
    Vector { len: usize },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                ..
            } => in_channels >= 1 && out_channels >= 1 && kernel_size >= 1 && stride >= 1,
            LayerSpec::MaxPool1d { window, stride } => window >= 1 && stride >= 1,
            LayerSpec::Dense {
                in_features,
                out_features,
            } => in_features >= 1 && out_features >= 1,
            LayerSpec::Relu | LayerSpec::GlobalAvgPool => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "layer has a zero size parameter: {self:?}"
            )))
        }
    }

    /// Shape produced from `input`, or an error if the layer cannot accept it.
    pub fn output_shape(&self, input: DataShape) -> Result<DataShape> {
        match (*self, input) {
            (
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel_size,
                    stride,
                    padding,
                },
                DataShape::Matrix { channels, steps },
            ) => {
                if channels != in_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "conv1d expects {in_channels} input channels, got {channels}"
                    )));
                }
                let steps = layers::conv1d_output_len(steps, kernel_size, stride, padding)?;
                Ok(DataShape::Matrix {
                    channels: out_channels,
                    steps,
                })
            }
            (LayerSpec::MaxPool1d { window, stride }, DataShape::Matrix { channels, steps }) => {
                if steps < window {
                    return Err(Error::WindowTooShort(steps));
                }
                Ok(DataShape::Matrix {
                    channels,
                    steps: (steps - window) / stride + 1,
                })
            }
            (LayerSpec::GlobalAvgPool, DataShape::Matrix { channels, .. }) => {
                Ok(DataShape::Vector { len: channels })
            }
            (LayerSpec::Relu, any) => Ok(any),
            (
                LayerSpec::Dense {
                    in_features,
                    out_features,
                },
                DataShape::Vector { len },
            ) => {
                if len != in_features {
                    return Err(Error::ShapeMismatch(format!(
                        "dense expects {in_features} input features, got {len}"
                    )));
                }
                Ok(DataShape::Vector { len: out_features })
            }
            (layer, shape) => Err(Error::ShapeMismatch(format!(
                "layer {layer:?} cannot consume shape {shape:?}"
            ))),
        }
    }

    /// `(weight shape, bias length)` for parameterized layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, usize)> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => Some((vec![out_channels, in_channels, kernel_size], out_channels)),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => Some((vec![out_features, in_features], out_features)),
            _ => None,
        }
    }

    /// Fan-in used for initialization scaling.
    pub fn fan_in(&self) -> Option<usize> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                kernel_size,
                ..
            } => Some(in_channels * kernel_size),
            LayerSpec::Dense { in_features, .. } => Some(in_features),
            _ => None,
        }
    }
}

/// Architecture description: input geometry plus the ordered layer stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Signal rows in the input (7 for the standard pipeline).
    pub signal_channels: usize,
    /// Condition rows appended to the input; 0 for the reference model.
    pub condition_channels: usize,
    /// Time steps per input.
    pub window_length: usize,
    pub layers: Vec<LayerSpec>,
    /// Length of the prediction vector (10 wear values).
    pub output_dim: usize,
}

impl NetworkConfig {
    /// Channels of the assembled input tensor.
    pub fn input_channels(&self) -> usize {
        self.signal_channels + self.condition_channels
    }

    /// Propagates shapes through the stack, returning the shape after each
    /// layer. Fails on any incompatibility or if the time axis would vanish.
    pub fn propagate_shapes(&self) -> Result<Vec<DataShape>> {
        let mut shape = DataShape::Matrix {
            channels: self.input_channels(),
            steps: self.window_length,
        };
        let mut shapes = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            layer.validate()?;
            shape = layer.output_shape(shape)?;
            shapes.push(shape);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal_channels == 0 || self.window_length == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig(
                "signal_channels, window_length and output_dim must all be >= 1".into(),
            ));
        }
        if let Some(LayerSpec::Conv1d { in_channels, .. }) = self
            .layers
            .iter()
            .find(|l| matches!(l, LayerSpec::Conv1d { .. }))
        {
            if *in_channels != self.input_channels() {
                return Err(Error::InvalidConfig(format!(
                    "first convolution takes {in_channels} channels but the input has {}",
                    self.input_channels()
                )));
            }
        }
        let shapes = self.propagate_shapes()?;
        match shapes.last() {
            Some(DataShape::Vector { len }) if *len == self.output_dim => Ok(()),
            other => Err(Error::InvalidConfig(format!(
                "network must end in a length-{} vector, ends in {other:?}",
                self.output_dim
            ))),
        }
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.param_shapes())
            .map(|(w, b)| w.iter().product::<usize>() + b)
            .sum()
    }
}

/// The default stack behind both models: one channel-fusing convolution at
/// full time resolution, three strided conv + pool stages, global average
/// pooling, and a two-layer head.
fn default_layers(input_channels: usize) -> Vec<LayerSpec> {
    let mut layers = vec![
        LayerSpec::Conv1d {
            in_channels: input_channels,
            out_channels: 32,
            kernel_size: 7,
            stride: 1,
            padding: 3,
        },
        LayerSpec::Relu,
    ];
    for _ in 0..3 {
        layers.push(LayerSpec::Conv1d {
            in_channels: 32,
            out_channels: 32,
            kernel_size: 5,
            stride: 2,
            padding: 2,
        });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::MaxPool1d { window: 2, stride: 2 });
    }
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::Dense {
        in_features: 32,
        out_features: 64,
    });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dense {
        in_features: 64,
        out_features: 10,
    });
    layers
}

/// Default condition-aware model: `condition_channels` must be ≥ 1.
pub fn default_test_config(window_length: usize, condition_channels: usize) -> Result<NetworkConfig> {
    if window_length < MIN_WINDOW {
        return Err(Error::WindowTooShort(window_length));
    }
    if condition_channels == 0 {
        return Err(Error::InvalidConfig(
            "the condition-aware model needs at least one condition channel".into(),
        ));
    }
    let cfg = NetworkConfig {
        signal_channels: SAMPLE_CHANNELS,
        condition_channels,
        window_length,
        layers: default_layers(SAMPLE_CHANNELS + condition_channels),
        output_dim: 10,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Default reference model: same stack, no condition channels.
pub fn default_reference_config(window_length: usize) -> Result<NetworkConfig> {
    if window_length < MIN_WINDOW {
        return Err(Error::WindowTooShort(window_length));
    }
    let cfg = NetworkConfig {
        signal_channels: SAMPLE_CHANNELS,
        condition_channels: 0,
        window_length,
        layers: default_layers(SAMPLE_CHANNELS),
        output_dim: 10,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Stacks the sample's signal rows with one constant row per condition key.
///
/// The sample is expected to be normalizer output, so condition values are
/// already unit-scaled.
pub fn build_input(sample: &ProcessedSample, condition_keys: &[ConditionKey]) -> Result<Tensor> {
    let t = sample.window_len();
    let channels = SAMPLE_CHANNELS + condition_keys.len();
    let mut data = Vec::with_capacity(channels * t);
    data.extend_from_slice(sample.signals.data());
    for key in condition_keys {
        let v = key.value(&sample.conditions);
        data.resize(data.len() + t, v);
    }
    Tensor::from_vec(&[channels, t], data)
}
