//! Forward and backward kernels for the individual layer types.
//!
//! Each forward function checks its input shape and returns a fresh tensor;
//! each backward function takes the layer's original input plus the gradient
//! flowing in from above and produces the input gradient (and parameter
//! gradients where applicable). Convolution uses zero padding.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn expect_2d(input: &Tensor, what: &str) -> Result<()> {
    if input.shape().len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "{what} expects a channels x time matrix, got shape {:?}",
            input.shape()
        )));
    }
    Ok(())
}

/// Output length of a convolution over `t_in` steps.
pub fn conv1d_output_len(t_in: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if t_in + 2 * padding < kernel {
        return Err(Error::KernelLargerThanInput {
            kernel,
            input: t_in,
            padding,
        });
    }
    Ok((t_in + 2 * padding - kernel) / stride + 1)
}

/// 1D convolution: `out[c,t] = bias[c] + sum_{i,k} w[c,i,k] * x[i, t*stride + k - padding]`
/// with zero padding outside the input.
pub fn conv1d_forward(
    input: &Tensor,
    weight: &[f64],
    bias: &[f64],
    out_channels: usize,
    kernel_size: usize,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    expect_2d(input, "conv1d")?;
    let in_channels = input.rows();
    let t_in = input.cols();
    if weight.len() != out_channels * in_channels * kernel_size || bias.len() != out_channels {
        return Err(Error::ShapeMismatch(format!(
            "conv1d weight/bias sized {}/{} do not match {out_channels}x{in_channels}x{kernel_size}",
            weight.len(),
            bias.len()
        )));
    }
    let t_out = conv1d_output_len(t_in, kernel_size, stride, padding)?;

    // Each kernel tap touches the strided subsequence of one input row whose
    // index is congruent to `k - padding` modulo the stride. Copying those
    // subsequences out once turns every tap into a contiguous
    // multiply-accumulate over two slices, which vectorizes; the per-element
    // accumulation order is unchanged. With stride 1 the row itself is the
    // only phase, so the copy is skipped.
    let phases = InputPhases::build(input, stride);

    let mut out = vec![0.0; out_channels * t_out];
    for c in 0..out_channels {
        let out_row = &mut out[c * t_out..(c + 1) * t_out];
        out_row.fill(bias[c]);
        for i in 0..in_channels {
            for k in 0..kernel_size {
                let w = weight[(c * in_channels + i) * kernel_size + k];
                let Some(tap) = TapRange::new(k, stride, padding, t_in, t_out) else {
                    continue;
                };
                let xs = phases.slice(i, &tap);
                for (o, &x) in out_row[tap.t_lo..tap.t_end].iter_mut().zip(xs) {
                    *o += w * x;
                }
            }
        }
    }
    Tensor::from_vec(&[out_channels, t_out], out)
}

/// Output range `[t_lo, t_end)` covered by kernel tap `k` together with the
/// location of its first source element, both in original and in
/// phase-buffer coordinates. `None` when the tap never lands inside the
/// input.
struct TapRange {
    t_lo: usize,
    t_end: usize,
    /// Index of the first source element in the input row.
    x0: usize,
    /// Which modulo-stride phase the tap reads.
    phase: usize,
    /// Index of the first source element inside that phase buffer.
    q0: usize,
}

impl TapRange {
    fn new(k: usize, stride: usize, padding: usize, t_in: usize, t_out: usize) -> Option<Self> {
        let s = stride as isize;
        let base = k as isize - padding as isize;
        // valid t satisfy 0 <= t*stride + base < t_in
        let t_lo = if base >= 0 { 0 } else { (-base + s - 1) / s };
        let t_hi = (t_in as isize - 1 - base).div_euclid(s) + 1;
        let t_lo = t_lo.clamp(0, t_out as isize) as usize;
        let t_end = t_hi.clamp(0, t_out as isize) as usize;
        if t_end <= t_lo {
            return None;
        }
        let x0 = (t_lo as isize * s + base) as usize;
        let phase = x0 % stride;
        Some(Self {
            t_lo,
            t_end,
            x0,
            phase,
            q0: (x0 - phase) / stride,
        })
    }

    fn len(&self) -> usize {
        self.t_end - self.t_lo
    }
}

/// Modulo-stride subsequences of every input row, or the rows themselves
/// when the stride is 1.
struct InputPhases<'a> {
    input: &'a Tensor,
    stride: usize,
    /// `buffers[i * stride + p]` holds row `i`'s elements at indices
    /// congruent to `p`; empty when `stride == 1`.
    buffers: Vec<Vec<f64>>,
}

impl<'a> InputPhases<'a> {
    fn build(input: &'a Tensor, stride: usize) -> Self {
        let buffers = if stride == 1 {
            Vec::new()
        } else {
            (0..input.rows())
                .flat_map(|i| {
                    let row = input.row(i);
                    (0..stride).map(move |p| row[p..].iter().step_by(stride).copied().collect())
                })
                .collect()
        };
        Self {
            input,
            stride,
            buffers,
        }
    }

    fn slice(&self, row: usize, tap: &TapRange) -> &[f64] {
        if self.stride == 1 {
            &self.input.row(row)[tap.x0..tap.x0 + tap.len()]
        } else {
            &self.buffers[row * self.stride + tap.phase][tap.q0..tap.q0 + tap.len()]
        }
    }
}

/// Gradients of [`conv1d_forward`]: returns `(grad_input, grad_weight, grad_bias)`.
pub fn conv1d_backward(
    input: &Tensor,
    weight: &[f64],
    grad_out: &Tensor,
    kernel_size: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    expect_2d(input, "conv1d backward")?;
    expect_2d(grad_out, "conv1d upstream gradient")?;
    let in_channels = input.rows();
    let t_in = input.cols();
    let out_channels = grad_out.rows();
    let t_out = grad_out.cols();
    if t_out != conv1d_output_len(t_in, kernel_size, stride, padding)? {
        return Err(Error::ShapeMismatch(format!(
            "conv1d upstream gradient has {t_out} steps, expected {}",
            conv1d_output_len(t_in, kernel_size, stride, padding)?
        )));
    }

    let mut grad_input = vec![0.0; in_channels * t_in];
    let mut grad_weight = vec![0.0; out_channels * in_channels * kernel_size];
    let mut grad_bias = vec![0.0; out_channels];
    for c in 0..out_channels {
        grad_bias[c] = grad_out.row(c).iter().sum();
    }

    // Same phase decomposition as the forward pass, with the input rows
    // processed outermost so each row's input-gradient phases are
    // accumulated contiguously and interleaved back just once.
    let phases = InputPhases::build(input, stride);
    let mut gi_phases: Vec<Vec<f64>> = vec![Vec::new(); if stride == 1 { 0 } else { stride }];
    for i in 0..in_channels {
        if stride > 1 {
            for (p, buf) in gi_phases.iter_mut().enumerate() {
                buf.clear();
                buf.resize(t_in.saturating_sub(p).div_ceil(stride), 0.0);
            }
        }
        for c in 0..out_channels {
            let g_row = grad_out.row(c);
            for k in 0..kernel_size {
                let w = weight[(c * in_channels + i) * kernel_size + k];
                let Some(tap) = TapRange::new(k, stride, padding, t_in, t_out) else {
                    continue;
                };
                let g = &g_row[tap.t_lo..tap.t_end];
                let xs = phases.slice(i, &tap);
                grad_weight[(c * in_channels + i) * kernel_size + k] = dot(g, xs);
                let gi = if stride == 1 {
                    &mut grad_input[i * t_in + tap.x0..i * t_in + tap.x0 + tap.len()]
                } else {
                    &mut gi_phases[tap.phase][tap.q0..tap.q0 + tap.len()]
                };
                for (o, &gv) in gi.iter_mut().zip(g) {
                    *o += w * gv;
                }
            }
        }
        if stride > 1 {
            let gi_row = &mut grad_input[i * t_in..(i + 1) * t_in];
            for (p, buf) in gi_phases.iter().enumerate() {
                for (q, &v) in buf.iter().enumerate() {
                    gi_row[p + q * stride] = v;
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(&[in_channels, t_in], grad_input)?,
        grad_weight,
        grad_bias,
    ))
}

/// Dot product with four running sums so the reduction can vectorize; the
/// result can differ from a strictly sequential sum by rounding only.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ac = a.chunks_exact(4);
    let mut bc = b.chunks_exact(4);
    for (av, bv) in (&mut ac).zip(&mut bc) {
        acc[0] += av[0] * bv[0];
        acc[1] += av[1] * bv[1];
        acc[2] += av[2] * bv[2];
        acc[3] += av[3] * bv[3];
    }
    let mut tail = 0.0;
    for (av, bv) in ac.remainder().iter().zip(bc.remainder()) {
        tail += av * bv;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Elementwise `max(0, x)`.
pub fn relu_forward(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|v| v.max(0.0)).collect();
    Tensor::from_vec(input.shape(), data).expect("shape is preserved")
}

/// Passes the gradient where the original input was positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu gradient shape {:?} does not match input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Max pooling over the time axis. Returns the pooled tensor and, for each
/// output element, the flat index of its source element (first maximum on
/// ties), which the backward pass scatters into.
pub fn maxpool1d_forward(input: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    expect_2d(input, "maxpool1d")?;
    let channels = input.rows();
    let t_in = input.cols();
    if window == 0 || stride == 0 || t_in < window {
        return Err(Error::ShapeMismatch(format!(
            "maxpool window {window} stride {stride} does not fit {t_in} steps"
        )));
    }
    let t_out = (t_in - window) / stride + 1;
    let mut out = Vec::with_capacity(channels * t_out);
    let mut argmax = Vec::with_capacity(channels * t_out);
    for c in 0..channels {
        let row = input.row(c);
        for t in 0..t_out {
            let start = t * stride;
            let mut best = row[start];
            let mut best_at = start;
            for (j, &v) in row[start + 1..start + window].iter().enumerate() {
                if v > best {
                    best = v;
                    best_at = start + j + 1;
                }
            }
            out.push(best);
            argmax.push(c * t_in + best_at);
        }
    }
    Ok((Tensor::from_vec(&[channels, t_out], out)?, argmax))
}

/// Scatters the upstream gradient back to the positions recorded in `argmax`.
pub fn maxpool1d_backward(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor,
) -> Result<Tensor> {
    if argmax.len() != grad_out.len() {
        return Err(Error::ShapeMismatch(format!(
            "maxpool argmax has {} entries for {} gradient values",
            argmax.len(),
            grad_out.len()
        )));
    }
    let mut grad_input = Tensor::zeros(input_shape);
    let data = grad_input.data_mut();
    for (&src, &g) in argmax.iter().zip(grad_out.data()) {
        data[src] += g;
    }
    Ok(grad_input)
}

/// Reduces each channel row to its mean: `[C, T] -> [C]`.
pub fn global_avg_pool_forward(input: &Tensor) -> Result<Tensor> {
    expect_2d(input, "global average pool")?;
    let t = input.cols();
    let data = (0..input.rows())
        .map(|c| input.row(c).iter().sum::<f64>() / t as f64)
        .collect();
    Tensor::from_vec(&[input.rows()], data)
}

/// Spreads each channel's gradient uniformly over its time steps.
pub fn global_avg_pool_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    expect_2d(input, "global average pool backward")?;
    if grad_out.shape() != [input.rows()] {
        return Err(Error::ShapeMismatch(format!(
            "global average pool gradient shape {:?}, expected [{}]",
            grad_out.shape(),
            input.rows()
        )));
    }
    let t = input.cols();
    let mut data = Vec::with_capacity(input.len());
    for c in 0..input.rows() {
        let g = grad_out.data()[c] / t as f64;
        data.resize(data.len() + t, g);
    }
    Tensor::from_vec(input.shape(), data)
}

/// Fully connected layer `W x + b` on a flat input vector.
pub fn dense_forward(
    input: &Tensor,
    weight: &[f64],
    bias: &[f64],
    out_features: usize,
) -> Result<Tensor> {
    if input.shape().len() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "dense expects a flat vector, got shape {:?}",
            input.shape()
        )));
    }
    let in_features = input.len();
    if weight.len() != out_features * in_features || bias.len() != out_features {
        return Err(Error::ShapeMismatch(format!(
            "dense weight/bias sized {}/{} do not match {out_features}x{in_features}",
            weight.len(),
            bias.len()
        )));
    }
    let x = input.data();
    let out = (0..out_features)
        .map(|o| {
            bias[o]
                + weight[o * in_features..(o + 1) * in_features]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        })
        .collect();
    Tensor::from_vec(&[out_features], out)
}

/// Gradients of [`dense_forward`]: returns `(grad_input, grad_weight, grad_bias)`.
pub fn dense_backward(
    input: &Tensor,
    weight: &[f64],
    grad_out: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let in_features = input.len();
    let out_features = grad_out.len();
    if weight.len() != out_features * in_features {
        return Err(Error::ShapeMismatch(format!(
            "dense weight sized {} does not match {out_features}x{in_features}",
            weight.len()
        )));
    }
    let x = input.data();
    let g = grad_out.data();
    let mut grad_weight = vec![0.0; weight.len()];
    let mut grad_input = vec![0.0; in_features];
    for o in 0..out_features {
        let w_row = &weight[o * in_features..(o + 1) * in_features];
        let gw_row = &mut grad_weight[o * in_features..(o + 1) * in_features];
        for i in 0..in_features {
            gw_row[i] = g[o] * x[i];
            grad_input[i] += w_row[i] * g[o];
        }
    }
    Ok((
        Tensor::from_vec(&[in_features], grad_input)?,
        grad_weight,
        g.to_vec(),
    ))
}
