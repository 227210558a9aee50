//! Deterministic input builders shared by the benchmarks. Everything here
//! is seeded so numbers stay comparable between machines and runs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wearcast_core::signal::{CuttingConditions, ProcessedSample, SAMPLE_CHANNELS};
use wearcast_core::tensor::Tensor;
use wearcast_core::wear::WearLabel;

/// A plausible raw channel: a tooth-passing carrier plus broadband noise.
pub fn noisy_channel(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = 2.0 * std::f64::consts::PI * 88.4194 * 50e-6;
    (0..len)
        .map(|i| (omega * i as f64).cos() + 0.1 * rng.random_range(-1.0..1.0))
        .collect()
}

/// A model-ready sample with seven signal rows and a mid-life wear label.
pub fn sample_window(window: usize, seed: u64) -> ProcessedSample {
    let mut data = Vec::with_capacity(SAMPLE_CHANNELS * window);
    for row in 0..SAMPLE_CHANNELS {
        data.extend(noisy_channel(window, seed + row as u64));
    }
    ProcessedSample {
        signals: Tensor::from_vec(&[SAMPLE_CHANNELS, window], data).expect("shape matches"),
        conditions: CuttingConditions {
            v_c: 25.0,
            a_p: 2.5,
            a_e: 1.5,
            f_z: 0.03,
        },
        label: WearLabel::from_values([
            90.0, 95.0, 100.0, 105.0, 110.0, 115.0, 120.0, 125.0, 97.5, 117.5,
        ])
        .expect("ordered label"),
        tool_id: 1,
        cut_index: 0,
    }
}
