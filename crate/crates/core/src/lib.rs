//! Flank-wear estimation for milling tools from multi-channel force and
//! torque signals.
//!
//! The crate covers the full chain: raw cut records through the signal
//! pipeline (segmentation, feed-frame rotation, FIR low-pass, windowing,
//! normalization), a small 1-D CNN with hand-rolled reverse-mode gradients
//! whose test variant receives cutting conditions as extra constant input
//! channels, Adam training with a step-decay schedule, and a transfer
//! protocol that holds out feed-per-tooth values to compare the
//! condition-aware model against a signals-only reference. A deterministic
//! synthetic campaign generator stands in for machine data.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod net;
pub mod signal;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod wear;

pub use error::{Error, Result};
pub use eval::{
    advantage_pct, r_squared, rmse, run_scenario, run_scenario_warm, EvaluationReport,
    ScenarioKind, ScenarioOptions, ScenarioOutcome, ScenarioSpec,
};
pub use net::{forward, LayerSpec, NetworkConfig, Parameters};
pub use signal::{
    assemble_sample, preprocess_record, ChannelId, ConditionKey, CutRecord, CuttingConditions,
    Normalizer, PreprocessOptions, ProcessedSample,
};
pub use synth::{generate_dataset, generate_processed, wear_curve, SynthConfig};
pub use tensor::Tensor;
pub use train::{fine_tune, train, TrainConfig, TrainOutcome};
pub use wear::{EdgeWearMeasurement, SectionLayout, WearLabel};
