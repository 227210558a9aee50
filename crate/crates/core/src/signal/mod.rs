//! Sensor-signal preprocessing.
//!
//! Raw per-cut recordings carry five sensor channels (spindle torque, two
//! rotating-dynamometer forces, two stationary-dynamometer forces) plus the
//! drive position angle. The pipeline isolates the milling segment, rotates
//! the stationary forces into the feed/normal frame, low-pass filters,
//! extracts a fixed trailing window, and derives the two resultant-force
//! rows, producing a 7×T matrix per cut.

pub mod filter;
pub mod normalize;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::wear::WearLabel;

pub use filter::{design_lowpass_fir, low_pass, low_pass_tail, FIR_TAPS};
pub use normalize::{apply_normalizer, fit_normalizer, Normalizer};

/// Number of signal rows in a processed sample.
pub const SAMPLE_CHANNELS: usize = 7;

/// Identifier for a raw or derived signal channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    /// Spindle torque, N·m (raw).
    #[serde(rename = "m_spindle")]
    Spindle,
    /// Rotating dynamometer force, tool x axis, N (raw).
    #[serde(rename = "f_rcd_x")]
    RcdX,
    /// Rotating dynamometer force, tool y axis, N (raw).
    #[serde(rename = "f_rcd_y")]
    RcdY,
    /// Stationary dynamometer force, machine x axis, N (raw).
    #[serde(rename = "f_sd_x")]
    SdX,
    /// Stationary dynamometer force, machine y axis, N (raw).
    #[serde(rename = "f_sd_y")]
    SdY,
    /// Stationary force rotated into the feed direction (derived).
    #[serde(rename = "f_sd_feed")]
    SdFeed,
    /// Stationary force perpendicular to the feed direction (derived).
    #[serde(rename = "f_sd_normal")]
    SdNormal,
    /// Resultant of the two rotating-dynamometer forces (derived).
    #[serde(rename = "f_rcd_resultant")]
    RcdResultant,
    /// Resultant of the feed/normal force pair (derived).
    #[serde(rename = "f_sd_resultant")]
    SdResultant,
}

impl ChannelId {
    /// The five channels present in a raw recording, in storage order.
    pub const RAW: [ChannelId; 5] = [
        ChannelId::Spindle,
        ChannelId::RcdX,
        ChannelId::RcdY,
        ChannelId::SdX,
        ChannelId::SdY,
    ];

    /// Row order of the processed 7×T sample matrix.
    pub const SAMPLE_ROWS: [ChannelId; SAMPLE_CHANNELS] = [
        ChannelId::Spindle,
        ChannelId::RcdX,
        ChannelId::RcdY,
        ChannelId::SdFeed,
        ChannelId::SdNormal,
        ChannelId::RcdResultant,
        ChannelId::SdResultant,
    ];

    pub fn is_raw(self) -> bool {
        Self::RAW.contains(&self)
    }

    pub fn is_derived(self) -> bool {
        !self.is_raw()
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Spindle => "m_spindle",
            ChannelId::RcdX => "f_rcd_x",
            ChannelId::RcdY => "f_rcd_y",
            ChannelId::SdX => "f_sd_x",
            ChannelId::SdY => "f_sd_y",
            ChannelId::SdFeed => "f_sd_feed",
            ChannelId::SdNormal => "f_sd_normal",
            ChannelId::RcdResultant => "f_rcd_resultant",
            ChannelId::SdResultant => "f_sd_resultant",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_spindle" => Ok(ChannelId::Spindle),
            "f_rcd_x" => Ok(ChannelId::RcdX),
            "f_rcd_y" => Ok(ChannelId::RcdY),
            "f_sd_x" => Ok(ChannelId::SdX),
            "f_sd_y" => Ok(ChannelId::SdY),
            "f_sd_feed" => Ok(ChannelId::SdFeed),
            "f_sd_normal" => Ok(ChannelId::SdNormal),
            "f_rcd_resultant" => Ok(ChannelId::RcdResultant),
            "f_sd_resultant" => Ok(ChannelId::SdResultant),
            other => Err(Error::MissingChannel(other.to_string())),
        }
    }
}

/// Process parameters of one cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuttingConditions {
    /// Cutting speed, m/min.
    pub v_c: f64,
    /// Cutting depth, mm.
    pub a_p: f64,
    /// Cutting width, mm.
    pub a_e: f64,
    /// Feed per tooth, mm.
    pub f_z: f64,
}

impl CuttingConditions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_c", self.v_c),
            ("a_p", self.a_p),
            ("a_e", self.a_e),
            ("f_z", self.f_z),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "cutting condition {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Selects one component of [`CuttingConditions`], e.g. for building the
/// condition channels of a network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionKey {
    #[serde(rename = "v_c")]
    Vc,
    #[serde(rename = "a_p")]
    Ap,
    #[serde(rename = "a_e")]
    Ae,
    #[serde(rename = "f_z")]
    Fz,
}

impl ConditionKey {
    pub const ALL: [ConditionKey; 4] = [
        ConditionKey::Vc,
        ConditionKey::Ap,
        ConditionKey::Ae,
        ConditionKey::Fz,
    ];

    pub fn value(self, conditions: &CuttingConditions) -> f64 {
        match self {
            ConditionKey::Vc => conditions.v_c,
            ConditionKey::Ap => conditions.a_p,
            ConditionKey::Ae => conditions.a_e,
            ConditionKey::Fz => conditions.f_z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditionKey::Vc => "v_c",
            ConditionKey::Ap => "a_p",
            ConditionKey::Ae => "a_e",
            ConditionKey::Fz => "f_z",
        }
    }
}

impl fmt::Display for ConditionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v_c" => Ok(ConditionKey::Vc),
            "a_p" => Ok(ConditionKey::Ap),
            "a_e" => Ok(ConditionKey::Ae),
            "f_z" => Ok(ConditionKey::Fz),
            other => Err(Error::UnknownConditionKey(other.to_string())),
        }
    }
}

/// One raw recorded cut: the five sensor channels plus the drive position.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRecord {
    pub tool_id: u32,
    /// Ordinal of this cut within the tool's life, starting at 0.
    pub cut_index: u32,
    pub conditions: CuttingConditions,
    /// Sampling period in seconds (canonical 50 µs).
    pub sampling_period: f64,
    pub channels: BTreeMap<ChannelId, Vec<f64>>,
    /// Drive position angle per time step, radians.
    pub drive_position: Vec<f64>,
    /// Tool diameter, mm.
    pub tool_diameter_mm: f64,
    /// Number of cutting edges.
    pub edge_count: u32,
}

impl CutRecord {
    /// Number of time steps in the record.
    pub fn len(&self) -> usize {
        self.drive_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drive_position.is_empty()
    }

    pub fn channel(&self, id: ChannelId) -> Result<&[f64]> {
        self.channels
            .get(&id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingChannel(id.name().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling period must be positive, got {}",
                self.sampling_period
            )));
        }
        self.conditions.validate()?;
        let len = self.len();
        if len == 0 {
            return Err(Error::ChannelLengthMismatch(
                "record has zero-length drive_position".into(),
            ));
        }
        for id in ChannelId::RAW {
            let ch = self.channel(id)?;
            if ch.len() != len {
                return Err(Error::ChannelLengthMismatch(format!(
                    "channel {id} has {} samples, drive_position has {len}",
                    ch.len()
                )));
            }
        }
        Ok(())
    }

    /// Copy of the record keeping only samples `start..end` of every channel.
    fn slice(&self, start: usize, end: usize) -> CutRecord {
        let mut out = self.clone();
        out.drive_position = self.drive_position[start..end].to_vec();
        for seq in out.channels.values_mut() {
            *seq = seq[start..end].to_vec();
        }
        out
    }
}

/// A preprocessed cut ready for the model: 7 signal rows × T time steps.
///
/// Row order: spindle torque, RCD x, RCD y, SD feed, SD normal,
/// RCD resultant, SD resultant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedSample {
    pub signals: Tensor,
    pub conditions: CuttingConditions,
    pub label: WearLabel,
    pub tool_id: u32,
    pub cut_index: u32,
}

impl ProcessedSample {
    /// Window length T in time steps.
    pub fn window_len(&self) -> usize {
        self.signals.cols()
    }

    /// Checks the row count and the pointwise resultant identities.
    pub fn validate(&self) -> Result<()> {
        if self.signals.rows() != SAMPLE_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "processed sample must have {SAMPLE_CHANNELS} rows, got {}",
                self.signals.rows()
            )));
        }
        let check = |res: &[f64], a: &[f64], b: &[f64], name: &str| -> Result<()> {
            for t in 0..res.len() {
                let want = resultant(a[t], b[t]);
                let tol = 1e-6 * want.abs().max(1.0);
                if (res[t] - want).abs() > tol {
                    return Err(Error::ShapeMismatch(format!(
                        "{name} row inconsistent at step {t}: {} vs {want}",
                        res[t]
                    )));
                }
            }
            Ok(())
        };
        check(
            self.signals.row(5),
            self.signals.row(1),
            self.signals.row(2),
            "rcd_resultant",
        )?;
        check(
            self.signals.row(6),
            self.signals.row(3),
            self.signals.row(4),
            "sd_resultant",
        )
    }
}

/// Removes entry/exit phases by trimming time margins off both ends.
///
/// Margin lengths are converted to sample counts by rounding
/// `margin / sampling_period`.
pub fn isolate_milling_segment(
    record: &CutRecord,
    entry_margin: f64,
    exit_margin: f64,
) -> Result<CutRecord> {
    if !(entry_margin >= 0.0 && exit_margin >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "margins must be non-negative, got entry {entry_margin}, exit {exit_margin}"
        )));
    }
    record.validate()?;
    let len = record.len();
    let head = (entry_margin / record.sampling_period).round() as usize;
    let tail = (exit_margin / record.sampling_period).round() as usize;
    if head + tail >= len {
        return Err(Error::SegmentTooShort {
            len,
            removed: head + tail,
        });
    }
    Ok(record.slice(head, len - tail))
}

/// Rotates a stationary-frame force pair by the drive position angle,
/// returning `(f_feed, f_normal)`.
pub fn rotate_to_feed_frame(f_x: f64, f_y: f64, theta: f64) -> (f64, f64) {
    let (sin, cos) = theta.sin_cos();
    (f_x * cos + f_y * sin, -f_x * sin + f_y * cos)
}

/// Magnitude of a two-component force.
pub fn resultant(f_a: f64, f_b: f64) -> f64 {
    (f_a * f_a + f_b * f_b).sqrt()
}

/// Keeps the trailing `duration` seconds of every channel.
pub fn extract_window(record: &CutRecord, duration: f64) -> Result<CutRecord> {
    record.validate()?;
    let wanted = (duration / record.sampling_period).round() as usize;
    if wanted == 0 {
        return Err(Error::InvalidConfig(format!(
            "window duration {duration} s is shorter than one sample"
        )));
    }
    let len = record.len();
    if wanted > len {
        return Err(Error::WindowLongerThanRecord { wanted, len });
    }
    Ok(record.slice(len - wanted, len))
}

/// Builds the 7×T model input from an already-segmented record.
///
/// The stationary forces are rotated into the feed/normal frame per time
/// step, the five sensor rows are low-pass filtered at `cutoff_hz` over the
/// trailing window of `window_s` seconds, and the two resultant rows are
/// computed from the filtered components so the resultant identity holds
/// pointwise.
pub fn assemble_sample(
    record: &CutRecord,
    label: &WearLabel,
    cutoff_hz: f64,
    window_s: f64,
) -> Result<ProcessedSample> {
    record.validate()?;
    let len = record.len();
    let wanted = (window_s / record.sampling_period).round() as usize;
    if wanted == 0 {
        return Err(Error::InvalidConfig(format!(
            "window duration {window_s} s is shorter than one sample"
        )));
    }
    if wanted > len {
        return Err(Error::WindowLongerThanRecord { wanted, len });
    }

    let sd_x = record.channel(ChannelId::SdX)?;
    let sd_y = record.channel(ChannelId::SdY)?;
    let mut sd_feed = Vec::with_capacity(len);
    let mut sd_normal = Vec::with_capacity(len);
    for t in 0..len {
        let (feed, normal) = rotate_to_feed_frame(sd_x[t], sd_y[t], record.drive_position[t]);
        sd_feed.push(feed);
        sd_normal.push(normal);
    }

    let tail = |signal: &[f64]| -> Result<Vec<f64>> {
        low_pass_tail(signal, record.sampling_period, cutoff_hz, wanted)
    };
    let spindle = tail(record.channel(ChannelId::Spindle)?)?;
    let rcd_x = tail(record.channel(ChannelId::RcdX)?)?;
    let rcd_y = tail(record.channel(ChannelId::RcdY)?)?;
    let sd_feed = tail(&sd_feed)?;
    let sd_normal = tail(&sd_normal)?;

    let rcd_res: Vec<f64> = rcd_x
        .iter()
        .zip(&rcd_y)
        .map(|(a, b)| resultant(*a, *b))
        .collect();
    let sd_res: Vec<f64> = sd_feed
        .iter()
        .zip(&sd_normal)
        .map(|(a, b)| resultant(*a, *b))
        .collect();

    let mut data = Vec::with_capacity(SAMPLE_CHANNELS * wanted);
    for row in [&spindle, &rcd_x, &rcd_y, &sd_feed, &sd_normal, &rcd_res, &sd_res] {
        data.extend_from_slice(row);
    }
    Ok(ProcessedSample {
        signals: Tensor::from_vec(&[SAMPLE_CHANNELS, wanted], data)?,
        conditions: record.conditions,
        label: label.clone(),
        tool_id: record.tool_id,
        cut_index: record.cut_index,
    })
}

/// Settings for turning a raw cut record into a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    /// Seconds trimmed from the start of each record (cut entry).
    pub entry_margin_s: f64,
    /// Seconds trimmed from the end of each record (cut exit).
    pub exit_margin_s: f64,
    /// Low-pass cutoff applied to every sensor channel, in hertz.
    pub cutoff_hz: f64,
    /// Length of the extracted trailing window, in time steps.
    pub window_steps: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            entry_margin_s: 0.5,
            exit_margin_s: 0.5,
            cutoff_hz: 8_000.0,
            window_steps: 20_000,
        }
    }
}

impl PreprocessOptions {
    /// Window length in seconds for a record sampled at `sampling_period`.
    pub fn window_duration(&self, sampling_period: f64) -> f64 {
        self.window_steps as f64 * sampling_period
    }
}

/// Runs the full pipeline on one record: trim the entry/exit phases, rotate,
/// filter, and keep the trailing window.
pub fn preprocess_record(
    record: &CutRecord,
    label: &WearLabel,
    options: &PreprocessOptions,
) -> Result<ProcessedSample> {
    let trimmed = isolate_milling_segment(record, options.entry_margin_s, options.exit_margin_s)?;
    let window_s = options.window_duration(record.sampling_period);
    assemble_sample(&trimmed, label, options.cutoff_hz, window_s)
}
