//! Training loop: Adam with bias correction, a step-decayed learning rate,
//! and deterministic seeded batching.
//!
//! Identical (seed, data, config) triples produce bit-identical parameters
//! and loss traces: shuffling uses a dedicated seeded PRNG, batches are
//! processed sequentially, and gradients accumulate in fixed order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{backward, build_input, forward, mse_loss, mse_loss_grad, NetworkConfig, Parameters};
use crate::signal::{ConditionKey, ProcessedSample};
use crate::wear::WearLabel;

/// Wear labels are divided by this (µm) before entering the loss, so
/// training targets are order-1; predictions are multiplied back before any
/// metric is computed.
pub const LABEL_SCALE_UM: f64 = 100.0;

/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// Learning-rate multiplier applied every `decay_every` epochs.
    pub decay_rate: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.001,
            decay_rate: 0.7,
            decay_every: 20,
            epochs: 100,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.initial_lr > 0.0, "initial_lr must be positive"),
            (
                self.decay_rate > 0.0 && self.decay_rate <= 1.0,
                "decay_rate must be in (0, 1]",
            ),
            (self.decay_every >= 1, "decay_every must be >= 1"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (
                (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2),
                "beta1 and beta2 must be in [0, 1)",
            ),
            (self.epsilon > 0.0, "epsilon must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidConfig(msg.into()));
            }
        }
        Ok(())
    }
}

/// Step-decayed learning rate: `initial_lr · decay_rate^floor(epoch / decay_every)`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.initial_lr * cfg.decay_rate.powi((epoch / cfg.decay_every) as i32)
}

/// First/second moment accumulators for Adam, aligned with the flat
/// parameter view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Parameters,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam update over {} params, {} grads, {} state entries",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    let theta = params.flat_mut();
    let g = grads.flat();
    for j in 0..theta.len() {
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g[j];
        state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
        let m_hat = state.m[j] / bias1;
        let v_hat = state.v[j] / bias2;
        theta[j] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// The label vector scaled into training-target units.
pub fn scaled_target(label: &WearLabel) -> [f64; 10] {
    label.values().map(|v| v / LABEL_SCALE_UM)
}

/// Trained parameters plus the per-epoch mean training MSE.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters,
    pub loss_trace: Vec<f64>,
}

/// Snapshot passed to the per-epoch observer.
pub struct EpochEvent<'a> {
    /// 0-based index of the epoch that just finished.
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample MSE seen during the epoch (before that batch's update).
    pub train_mse: f64,
    pub params: &'a Parameters,
}

/// Trains from a fresh seeded initialization.
pub fn train(
    config: &NetworkConfig,
    dataset: &[ProcessedSample],
    condition_keys: &[ConditionKey],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let init = Parameters::init(config, cfg.seed);
    train_from(config, init, dataset, condition_keys, cfg)
}

/// Trains starting from the given parameters (warm start).
pub fn train_from(
    config: &NetworkConfig,
    init: Parameters,
    dataset: &[ProcessedSample],
    condition_keys: &[ConditionKey],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_observer(config, init, dataset, condition_keys, cfg, |_| {})
}

/// Full training loop with a per-epoch callback (checkpointing, logging).
///
/// Samples must already be normalized; `condition_keys` picks the condition
/// rows appended to each input (empty for the reference model).
pub fn train_with_observer(
    config: &NetworkConfig,
    init: Parameters,
    dataset: &[ProcessedSample],
    condition_keys: &[ConditionKey],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochEvent<'_>),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inputs: Vec<_> = dataset
        .iter()
        .map(|s| build_input(s, condition_keys))
        .collect::<Result<_>>()?;
    let targets: Vec<[f64; 10]> = dataset.iter().map(|s| scaled_target(&s.label)).collect();

    let mut params = init;
    let mut state = AdamState::new(params.len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad_sum = Parameters::zeros(config);
            for &idx in batch {
                let trace = forward(config, &params, &inputs[idx])?;
                epoch_loss_sum += mse_loss(trace.output(), &targets[idx])?;
                let loss_grad = mse_loss_grad(trace.output(), &targets[idx])?;
                let (grads, _) = backward(config, &params, &trace, &loss_grad)?;
                for (acc, g) in grad_sum.flat_mut().iter_mut().zip(grads.flat()) {
                    *acc += g;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grad_sum.flat_mut() {
                *g *= inv;
            }
            adam_step(&mut params, &grad_sum, &mut state, lr, cfg)?;
        }
        let train_mse = epoch_loss_sum / dataset.len() as f64;
        loss_trace.push(train_mse);
        on_epoch(&EpochEvent {
            epoch,
            lr,
            train_mse,
            params: &params,
        });
    }
    Ok(TrainOutcome { params, loss_trace })
}

/// True when `epoch` is the last one before a learning-rate decay step, or
/// the last epoch overall — the natural places to keep a checkpoint.
pub fn decay_stage_end(epoch: usize, cfg: &TrainConfig) -> bool {
    epoch + 1 >= cfg.epochs || lr_at(epoch + 1, cfg) != lr_at(epoch, cfg)
}

/// Writes a loss trace as CSV with columns `epoch,lr,train_mse`, one row
/// per trained epoch.
pub fn write_loss_trace_csv(
    path: impl AsRef<std::path::Path>,
    cfg: &TrainConfig,
    trace: &[f64],
) -> Result<()> {
    use std::io::Write as _;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,lr,train_mse")?;
    for (epoch, mse) in trace.iter().enumerate() {
        writeln!(out, "{epoch},{},{mse}", lr_at(epoch, cfg))?;
    }
    out.flush()?;
    Ok(())
}

/// Continues training a fitted model on the original training set enlarged
/// by `extra`, restarting the schedule at epoch 0 (warm start).
pub fn fine_tune(
    config: &NetworkConfig,
    trained: Parameters,
    original: &[ProcessedSample],
    extra: &[ProcessedSample],
    condition_keys: &[ConditionKey],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if extra.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut combined = original.to_vec();
    combined.extend_from_slice(extra);
    train_from(config, trained, &combined, condition_keys, cfg)
}
