//! Linear-phase FIR low-pass filtering.
//!
//! The filter is a 255-tap windowed-sinc design with a Hamming window,
//! normalized to unit DC gain. Edges are handled by whole-sample reflection
//! (`x[-k] = x[k]`), which preserves constants exactly and keeps the output
//! the same length as the input.

use crate::error::{Error, Result};

/// Number of taps in the low-pass FIR. Odd so the filter has an integer
/// group delay of `(FIR_TAPS - 1) / 2` samples.
pub const FIR_TAPS: usize = 255;

/// Designs the low-pass FIR for the given sampling period and cutoff.
///
/// Taps are normalized so they sum to exactly 1, making the DC gain unity.
pub fn design_lowpass_fir(sampling_period: f64, cutoff_hz: f64) -> Result<Vec<f64>> {
    if !(sampling_period > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling period must be positive, got {sampling_period}"
        )));
    }
    if !(cutoff_hz > 0.0) {
        return Err(Error::NonPositiveCutoff(cutoff_hz));
    }
    let nyquist_hz = 0.5 / sampling_period;
    if cutoff_hz >= nyquist_hz {
        return Err(Error::CutoffAboveNyquist {
            cutoff_hz,
            nyquist_hz,
        });
    }

    let mid = (FIR_TAPS - 1) as f64 / 2.0;
    let fc = cutoff_hz * sampling_period; // cycles per sample
    let mut taps = Vec::with_capacity(FIR_TAPS);
    for k in 0..FIR_TAPS {
        let t = k as f64 - mid;
        let sinc = if t == 0.0 {
            2.0 * fc
        } else {
            (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
        };
        let window = 0.54
            - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (FIR_TAPS - 1) as f64).cos();
        taps.push(sinc * window);
    }
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    Ok(taps)
}

/// Maps an out-of-range index back into `[0, len)` by reflecting about the
/// endpoints without duplicating the edge sample.
fn reflect(mut j: isize, len: isize) -> usize {
    if len == 1 {
        return 0;
    }
    loop {
        if j < 0 {
            j = -j;
        } else if j >= len {
            j = 2 * (len - 1) - j;
        } else {
            return j as usize;
        }
    }
}

/// Computes filtered outputs for indices `start..end` only. Interior indices
/// use a contiguous dot product; indices near the edges reflect.
fn filter_range(signal: &[f64], taps: &[f64], start: usize, end: usize) -> Vec<f64> {
    let len = signal.len() as isize;
    let half = (taps.len() / 2) as isize;
    let mut out = Vec::with_capacity(end - start);
    for i in start..end {
        let i = i as isize;
        let lo = i - half;
        let acc = if lo >= 0 && i + half < len {
            let seg = &signal[lo as usize..(i + half + 1) as usize];
            taps.iter().zip(seg).map(|(t, v)| t * v).sum()
        } else {
            taps.iter()
                .enumerate()
                .map(|(k, t)| t * signal[reflect(lo + k as isize, len)])
                .sum()
        };
        out.push(acc);
    }
    out
}

/// Low-pass filters a signal, returning an output of the same length.
pub fn low_pass(signal: &[f64], sampling_period: f64, cutoff_hz: f64) -> Result<Vec<f64>> {
    let taps = design_lowpass_fir(sampling_period, cutoff_hz)?;
    Ok(filter_range(signal, &taps, 0, signal.len()))
}

/// Low-pass filters only the last `tail_len` samples of a signal.
///
/// Bit-identical to `low_pass` followed by taking the last `tail_len`
/// outputs, but skips the work for everything before the tail.
pub fn low_pass_tail(
    signal: &[f64],
    sampling_period: f64,
    cutoff_hz: f64,
    tail_len: usize,
) -> Result<Vec<f64>> {
    if tail_len > signal.len() {
        return Err(Error::WindowLongerThanRecord {
            wanted: tail_len,
            len: signal.len(),
        });
    }
    let taps = design_lowpass_fir(sampling_period, cutoff_hz)?;
    Ok(filter_range(signal, &taps, signal.len() - tail_len, signal.len()))
}
