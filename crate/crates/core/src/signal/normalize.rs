//! Input normalization fitted on a training set and frozen afterwards.
//!
//! Signal channels are z-scored with per-channel statistics; cutting
//! conditions are min–max scaled to `[0, 1]` over the fit set's ranges.
//! Applying the normalizer never updates its statistics, so train-set
//! scaling carries over unchanged to evaluation data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ConditionKey, CuttingConditions, ProcessedSample, SAMPLE_CHANNELS};

/// A channel's standard deviation below this is treated as degenerate: the
/// channel is centered but divided by 1 instead of ~0.
const DEGENERATE_STD: f64 = 1e-12;

/// Frozen normalization statistics for signals and conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    mean: [f64; SAMPLE_CHANNELS],
    scale: [f64; SAMPLE_CHANNELS],
    degenerate: [bool; SAMPLE_CHANNELS],
    cond_min: [f64; 4],
    cond_scale: [f64; 4],
}

impl Normalizer {
    /// Computes per-channel mean/stddev and per-condition min/range over the
    /// fit set. The fit set is the only data that ever influences the
    /// transform.
    pub fn fit(samples: &[ProcessedSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyFitSet);
        }
        let mut mean = [0.0; SAMPLE_CHANNELS];
        let mut scale = [0.0; SAMPLE_CHANNELS];
        let mut degenerate = [false; SAMPLE_CHANNELS];
        for c in 0..SAMPLE_CHANNELS {
            let mut sum = 0.0;
            let mut count = 0usize;
            for s in samples {
                for v in s.signals.row(c) {
                    sum += v;
                }
                count += s.signals.cols();
            }
            let mu = sum / count as f64;
            let mut ss = 0.0;
            for s in samples {
                for v in s.signals.row(c) {
                    ss += (v - mu) * (v - mu);
                }
            }
            let std = (ss / count as f64).sqrt();
            mean[c] = mu;
            degenerate[c] = std < DEGENERATE_STD;
            scale[c] = if degenerate[c] { 1.0 } else { std };
        }

        let mut cond_min = [f64::INFINITY; 4];
        let mut cond_max = [f64::NEG_INFINITY; 4];
        for s in samples {
            for (i, key) in ConditionKey::ALL.iter().enumerate() {
                let v = key.value(&s.conditions);
                cond_min[i] = cond_min[i].min(v);
                cond_max[i] = cond_max[i].max(v);
            }
        }
        let mut cond_scale = [1.0; 4];
        for i in 0..4 {
            let range = cond_max[i] - cond_min[i];
            if range >= DEGENERATE_STD {
                cond_scale[i] = range;
            }
        }
        Ok(Self {
            mean,
            scale,
            degenerate,
            cond_min,
            cond_scale,
        })
    }

    /// Returns a copy of the sample with z-scored signal rows and unit-scaled
    /// conditions. Scaled conditions live in `[0, 1]` for fit-set samples and
    /// may fall outside that interval for out-of-range data.
    pub fn apply(&self, sample: &ProcessedSample) -> ProcessedSample {
        let mut out = sample.clone();
        for c in 0..SAMPLE_CHANNELS {
            for v in out.signals.row_mut(c) {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        out.conditions = self.normalize_conditions(&sample.conditions);
        out
    }

    /// Min–max scales each condition component with the fit-set ranges.
    pub fn normalize_conditions(&self, conditions: &CuttingConditions) -> CuttingConditions {
        let scaled = |i: usize, v: f64| (v - self.cond_min[i]) / self.cond_scale[i];
        CuttingConditions {
            v_c: scaled(0, conditions.v_c),
            a_p: scaled(1, conditions.a_p),
            a_e: scaled(2, conditions.a_e),
            f_z: scaled(3, conditions.f_z),
        }
    }

    /// Fitted `(mean, divisor)` for a signal channel row.
    pub fn channel_stats(&self, channel: usize) -> (f64, f64) {
        (self.mean[channel], self.scale[channel])
    }

    /// Whether a channel had (near-)zero variance in the fit set.
    pub fn is_degenerate(&self, channel: usize) -> bool {
        self.degenerate[channel]
    }
}

/// Fits a [`Normalizer`] on the given samples.
pub fn fit_normalizer(samples: &[ProcessedSample]) -> Result<Normalizer> {
    Normalizer::fit(samples)
}

/// Applies a fitted [`Normalizer`] to one sample.
pub fn apply_normalizer(normalizer: &Normalizer, sample: &ProcessedSample) -> ProcessedSample {
    normalizer.apply(sample)
}
